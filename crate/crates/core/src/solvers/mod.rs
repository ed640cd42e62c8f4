//! Sparse recovery: greedy pursuit, basis pursuit denoising, the exhaustive
//! l0 reference, and post-processing of the recovered coefficients.

mod admm;
mod homotopy;
mod omp;
pub(crate) mod oracle;

use nalgebra::DVector;
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub use admm::{bpdn_admm, AdmmOutcome, UnknownDomain};
pub use homotopy::{nonneg_homotopy, HomotopyOutcome};
pub use omp::{omp, OmpOutcome};
pub use oracle::{l0_oracle, OracleOutcome, ENUMERATION_LIMIT};

use crate::dictionary::{DictionaryBuilder, SensingMatrix};
use crate::error::{Error, Result};
use crate::model::{Coefficients, SolverDiagnostics, SparseImage, VelocityBlocks, C64};

/// Residual-constrained l1 settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpdnConfig {
    /// Residual bound: solutions satisfy `||y - D s|| <= beta`.
    pub beta: f64,
    pub max_iterations: usize,
    pub tol_primal: f64,
    pub tol_dual: f64,
    /// Restrict the unknown to nonnegative reals.
    pub nonnegative: bool,
    /// Initial ADMM penalty, relative to the normalised problem.
    pub rho: f64,
    /// Residual-balancing factor for penalty updates (1 disables them).
    pub rho_balance: f64,
    /// Attempt an active-set certificate every this many iterations.
    pub polish_every: usize,
}

impl Default for BpdnConfig {
    fn default() -> Self {
        BpdnConfig {
            beta: 0.0,
            max_iterations: 50_000,
            tol_primal: 1e-8,
            tol_dual: 1e-8,
            nonnegative: false,
            rho: 1.0,
            rho_balance: 10.0,
            polish_every: 25,
        }
    }
}

impl BpdnConfig {
    pub fn with_beta(beta: f64) -> Self {
        BpdnConfig { beta, ..Self::default() }
    }

    pub fn nonnegative(mut self) -> Self {
        self.nonnegative = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::config("method.beta", format!("must be nonnegative, got {}", self.beta)));
        }
        if !(self.tol_primal > 0.0 && self.tol_dual > 0.0) {
            return Err(Error::config("method.tolerance", "tolerances must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("method.max_iterations", "must be positive"));
        }
        if !(self.rho > 0.0 && self.rho_balance >= 1.0) {
            return Err(Error::config("method.rho", "penalty must be positive"));
        }
        Ok(())
    }
}

/// Greedy pursuit settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmpConfig {
    /// Stop once the residual norm is at or below this value.
    pub threshold: f64,
    pub max_atoms: usize,
    /// Divide correlations by column norms before selecting.
    pub normalize: bool,
}

impl OmpConfig {
    pub fn new(threshold: f64, max_atoms: usize) -> Self {
        OmpConfig { threshold, max_atoms, normalize: true }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return Err(Error::config("method.omp_threshold", "must be nonnegative"));
        }
        if self.max_atoms == 0 {
            return Err(Error::config("method.omp_max_atoms", "must be at least 1"));
        }
        Ok(())
    }
}

/// `sigma * sqrt(q / 2)` with `q` the 0.99 quantile of a chi-square law with
/// `2 n` degrees of freedom, so `P(||w|| > beta) = 0.01` for `n` complex
/// noise entries of variance `sigma^2`.
pub fn default_beta(sigma: f64, n_complex: usize) -> Result<f64> {
    if sigma == 0.0 || n_complex == 0 {
        return Ok(0.0);
    }
    let chi = ChiSquared::new(2.0 * n_complex as f64).map_err(|e| Error::Numeric(e.to_string()))?;
    Ok(sigma * (chi.inverse_cdf(0.99) / 2.0).sqrt())
}

fn image(shape: (usize, usize), coefficients: Coefficients, diagnostics: SolverDiagnostics) -> SparseImage {
    SparseImage { n_x: shape.0, n_z: shape.1, coefficients, blocks: None, diagnostics }
}

fn check_rows<D: SensingMatrix + ?Sized>(y: &DVector<C64>, d: &D) -> Result<()> {
    if y.len() != d.rows() {
        return Err(Error::Data(format!("data has {} entries, dictionary has {} rows", y.len(), d.rows())));
    }
    Ok(())
}

/// Greedy pursuit on any sensing matrix.
pub fn omp_solve<D: SensingMatrix>(y: &DVector<C64>, d: &D, cfg: &OmpConfig) -> Result<SparseImage> {
    let out = omp(y, d, cfg)?;
    Ok(image(d.grid_shape(), Coefficients::Complex(out.coefficients), out.diagnostics))
}

/// Complex-valued residual-constrained l1 recovery for one transmission.
pub fn bpdn_simo<D: SensingMatrix>(y: &DVector<C64>, d: &D, cfg: &BpdnConfig) -> Result<SparseImage> {
    if cfg.nonnegative {
        return Err(Error::config("method.nonnegative", "single-transmitter unknowns are complex"));
    }
    check_rows(y, d)?;
    let out = bpdn_admm(y, &d.to_dense(), UnknownDomain::Complex, cfg)?;
    Ok(image(d.grid_shape(), Coefficients::Complex(out.complex()), out.diagnostics))
}

/// Nonnegative residual-constrained l1 recovery on the stacked
/// full-matrix data.
pub fn bpdn_mimo<D: SensingMatrix>(y: &DVector<C64>, d: &D, cfg: &BpdnConfig) -> Result<SparseImage> {
    if !cfg.nonnegative {
        return Err(Error::config("method.nonnegative", "full-matrix unknowns are nonnegative"));
    }
    check_rows(y, d)?;
    cfg.validate()?;
    let out = nonneg_homotopy(y, d, cfg.beta, cfg.max_iterations)?;
    Ok(image(d.grid_shape(), Coefficients::Real(out.coefficients), out.diagnostics))
}

/// [`bpdn_mimo`] over a multi-velocity dictionary, plus per-block norms.
pub fn bpdn_mimo_uv(y: &DVector<C64>, psi: &crate::dictionary::Dictionary, cfg: &BpdnConfig) -> Result<(SparseImage, Vec<f64>)> {
    let mut img = bpdn_mimo(y, psi, cfg)?;
    let n = psi.pixels();
    let norms = match &img.coefficients {
        Coefficients::Real(v) => v.chunks(n).map(|b| b.iter().map(|x| x * x).sum::<f64>().sqrt()).collect::<Vec<_>>(),
        Coefficients::Complex(v) => v.chunks(n).map(|b| b.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()).collect(),
    };
    img.blocks = Some(VelocityBlocks { velocities: psi.velocities(), norms: norms.clone() });
    Ok((img, norms))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocitySelection {
    /// 0-based block index.
    pub index: usize,
    pub velocity: f64,
    /// Set when the two largest norms differ by less than 1e-6 relative.
    pub ambiguous: bool,
}

pub fn select_velocity(norms: &[f64], velocities: &[f64]) -> Result<VelocitySelection> {
    if norms.is_empty() || norms.len() != velocities.len() {
        return Err(Error::Parameter("need one norm per trial velocity".into()));
    }
    let mut best = 0;
    for (q, n) in norms.iter().enumerate() {
        if *n > norms[best] {
            best = q;
        }
    }
    let top = norms[best];
    if !(top > 0.0) {
        return Err(Error::NoSignal);
    }
    let ambiguous = norms.iter().enumerate().any(|(q, n)| q != best && (top - n).abs() < 1e-6 * top);
    Ok(VelocitySelection { index: best, velocity: velocities[best], ambiguous })
}

/// Divide each nonzero coefficient by the transmit integral of element `p`
/// at its pixel.
pub fn recover_reflectivity(s: &SparseImage, omega: f64, p: usize, builder: &DictionaryBuilder) -> Result<SparseImage> {
    let m = builder.geometry.element_count();
    if p >= m {
        return Err(Error::Index { index: p + 1, len: m });
    }
    let t = builder.full_tables(omega)?;
    let tx = t.tx()?;
    let phi_max = t.rx.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let coeffs = s.coefficients.as_complex();
    if coeffs.len() != tx.ncols() {
        return Err(Error::Data(format!("image has {} pixels, grid has {}", coeffs.len(), tx.ncols())));
    }
    let mut out = Vec::with_capacity(coeffs.len());
    for (l, c) in coeffs.iter().enumerate() {
        if c.norm() == 0.0 {
            out.push(C64::new(0.0, 0.0));
            continue;
        }
        let t = tx[(p, l)];
        if t.norm() < 1e-12 * phi_max {
            return Err(Error::DivisionGuard { pixel: l });
        }
        out.push(c / t);
    }
    Ok(SparseImage { coefficients: Coefficients::Complex(out), ..s.clone() })
}
