use nalgebra::DVector;

use crate::dictionary::SensingMatrix;
use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::model::C64;

/// Largest number of supports the exhaustive search will visit.
pub const ENUMERATION_LIMIT: u128 = 200_000;

#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub coefficients: Vec<C64>,
    pub support: Vec<usize>,
    pub residual_norm: f64,
    pub subsets_tried: usize,
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Advance `idx` to the next k-subset of 0..n in lexicographic order.
pub(crate) fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Smallest support (then smallest residual) of size at most `k_max` whose
/// least-squares fit meets `||y - D s|| <= beta`.
pub fn l0_oracle<D: SensingMatrix>(y: &DVector<C64>, d: &D, k_max: usize, beta: f64) -> Result<OracleOutcome> {
    let n = d.cols();
    if y.len() != d.rows() {
        return Err(Error::Data(format!("data has {} entries, dictionary has {} rows", y.len(), d.rows())));
    }
    let total: u128 = (0..=k_max.min(n)).map(|k| binomial(n, k)).sum();
    if total > ENUMERATION_LIMIT {
        return Err(Error::Refusal { subsets: total, limit: ENUMERATION_LIMIT });
    }
    let dense = d.to_dense();
    let mut tried = 0;
    if y.norm() <= beta {
        return Ok(OracleOutcome {
            coefficients: vec![C64::new(0.0, 0.0); n],
            support: Vec::new(),
            residual_norm: y.norm(),
            subsets_tried: 1,
        });
    }
    for k in 1..=k_max.min(n) {
        let mut idx: Vec<usize> = (0..k).collect();
        let mut best: Option<(f64, Vec<usize>, DVector<C64>)> = None;
        loop {
            tried += 1;
            let sub = dense.select_columns(idx.iter());
            if let Some(fit) = least_squares(&sub, y, 1e-10) {
                let r = (y - &sub * &fit).norm();
                if r <= beta && best.as_ref().map_or(true, |b| r < b.0) {
                    best = Some((r, idx.clone(), fit));
                }
            }
            if !next_combination(&mut idx, n) {
                break;
            }
        }
        if let Some((r, support, fit)) = best {
            let mut coefficients = vec![C64::new(0.0, 0.0); n];
            for (i, &j) in support.iter().enumerate() {
                coefficients[j] = fit[i];
            }
            return Ok(OracleOutcome { coefficients, support, residual_norm: r, subsets_tried: tried });
        }
    }
    Err(Error::Infeasible { beta, min_residual: f64::NAN })
}
