use nalgebra::{DMatrix, DVector};

use super::OmpConfig;
use crate::dictionary::SensingMatrix;
use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::model::{SolverDiagnostics, C64};

/// Rank test for the least-squares refit.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct OmpOutcome {
    pub coefficients: Vec<C64>,
    /// Selected atoms in selection order.
    pub support: Vec<usize>,
    pub residual_norms: Vec<f64>,
    pub diagnostics: SolverDiagnostics,
}

/// Orthogonal matching pursuit: pick the atom most correlated with the
/// residual, refit all selected atoms by least squares, repeat.
pub fn omp<D: SensingMatrix>(y: &DVector<C64>, d: &D, cfg: &OmpConfig) -> Result<OmpOutcome> {
    cfg.validate()?;
    if y.len() != d.rows() {
        return Err(Error::Data(format!("data has {} entries, dictionary has {} rows", y.len(), d.rows())));
    }
    let n = d.cols();
    let norms = if cfg.normalize { d.column_norms() } else { vec![1.0; n] };
    let mut support: Vec<usize> = Vec::new();
    let mut blocked = vec![false; n];
    let mut atoms = DMatrix::<C64>::zeros(d.rows(), 0);
    let mut coef = DVector::<C64>::zeros(0);
    let mut residual = y.clone();
    let mut rnorm = residual.norm();
    let mut residual_norms = vec![rnorm];
    let mut notes = Vec::new();
    let mut attempts = 0;

    while rnorm > cfg.threshold && support.len() < cfg.max_atoms.min(n) {
        let corr = d.apply_adjoint(residual.as_slice());
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if blocked[j] || norms[j] == 0.0 {
                continue;
            }
            let score = corr[j].norm() / norms[j];
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let Some((j, score)) = best else {
            return Err(Error::Stall { residual: rnorm });
        };
        if score == 0.0 {
            return Err(Error::Stall { residual: rnorm });
        }
        attempts += 1;
        blocked[j] = true;
        let trial = atoms.clone().insert_column(atoms.ncols(), C64::new(0.0, 0.0));
        let mut trial = trial;
        trial.set_column(atoms.ncols(), &d.column(j));
        let Some(fit) = least_squares(&trial, y, RANK_TOL) else {
            notes.push(format!("atom {j} rejected: rank-deficient active set"));
            continue;
        };
        let new_residual = y - &trial * &fit;
        let new_norm = new_residual.norm();
        if !(new_norm < rnorm) {
            notes.push(format!("atom {j} rejected: residual did not decrease"));
            continue;
        }
        support.push(j);
        atoms = trial;
        coef = fit;
        residual = new_residual;
        rnorm = new_norm;
        residual_norms.push(rnorm);
    }

    let mut coefficients = vec![C64::new(0.0, 0.0); n];
    for (k, &j) in support.iter().enumerate() {
        coefficients[j] = coef[k];
    }
    let objective = coefficients.iter().map(|z| z.norm()).sum();
    let trace = residual_norms.iter().enumerate().map(|(i, r)| (i, *r, 0.0)).collect();
    Ok(OmpOutcome {
        coefficients,
        support: support.clone(),
        residual_norms,
        diagnostics: SolverDiagnostics {
            method: "omp".into(),
            iterations: support.len(),
            residual_norm: rnorm,
            objective,
            trace,
            notes: if attempts > support.len() { notes } else { Vec::new() },
        },
    })
}
