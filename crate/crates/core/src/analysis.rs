//! Uniqueness conditions, empirical spark, and closed-form error bounds.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;

use crate::dictionary::SensingMatrix;
use crate::error::{Error, Result};
use crate::linalg::{max_column_sum, spectral_norm};
use crate::model::{ArrayGeometry, ImagingGrid, TwoLayerMedium, C64};
use crate::propagation::{InterfaceNodes, QuadratureSpec};
use crate::solvers::oracle::{binomial, next_combination, ENUMERATION_LIMIT};

/// Relative singular value tolerance of the spark rank test.
pub const SPARK_RANK_TOL: f64 = 1e-10;

/// Denominators of the greedy error bounds below this value are rejected.
pub const INTEGRAL_GUARD: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simo,
    Mimo,
}

impl Mode {
    pub fn measurements(self, elements: usize) -> usize {
        match self {
            Mode::Simo => elements,
            Mode::Mimo => elements * elements,
        }
    }
}

/// One row of a structured report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub condition: String,
    pub value: f64,
    pub threshold: f64,
    /// `None` for informational rows.
    pub passed: Option<bool>,
}

impl Check {
    pub fn new(condition: impl Into<String>, value: f64, threshold: f64, passed: Option<bool>) -> Self {
        Check { condition: condition.into(), value, threshold, passed }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn extend(&mut self, other: Report) {
        self.checks.extend(other.checks);
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed != Some(false))
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<40} {:>16} {:>16}  status", "condition", "value", "threshold")?;
        for c in &self.checks {
            let status = match c.passed {
                Some(true) => "pass",
                Some(false) => "fail",
                None => "info",
            };
            writeln!(f, "{:<40} {:>16.6e} {:>16.6e}  {}", c.condition, c.value, c.threshold, status)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    pub mode: Mode,
    pub elements: usize,
    pub sparsity: usize,
    pub pixels: usize,
    pub measurements: usize,
    pub unique: bool,
    /// measurements / (L ln N), printed raw.
    pub stability_ratio: f64,
    pub stable: bool,
}

impl UniquenessReport {
    pub fn report(&self) -> Report {
        let mut r = Report::default();
        let label = match self.mode {
            Mode::Simo => "M > 2L",
            Mode::Mimo => "M^2 > 2L",
        };
        r.push(Check::new(label, self.measurements as f64, 2.0 * self.sparsity as f64, Some(self.unique)));
        let needed = (self.sparsity as f64 * (self.pixels as f64).ln()).ceil();
        r.push(Check::new("measurements >= ceil(L ln N)", self.measurements as f64, needed, Some(self.stable)));
        r.push(Check::new("measurements / (L ln N)", self.stability_ratio, 1.0, None));
        r
    }
}

pub fn uniqueness_check(elements: usize, sparsity: usize, pixels: usize, mode: Mode) -> UniquenessReport {
    let measurements = mode.measurements(elements);
    let l_log_n = sparsity as f64 * (pixels as f64).ln();
    UniquenessReport {
        mode,
        elements,
        sparsity,
        pixels,
        measurements,
        unique: measurements > 2 * sparsity,
        stability_ratio: measurements as f64 / l_log_n,
        stable: measurements as f64 >= l_log_n.ceil(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spark {
    Exact(usize),
    /// Every subset of at most this many columns is independent.
    GreaterThan(usize),
}

impl Spark {
    /// Whether the spark certifiably exceeds `n`.
    pub fn exceeds(self, n: usize) -> bool {
        match self {
            Spark::Exact(s) => s > n,
            Spark::GreaterThan(s) => s >= n,
        }
    }
}

impl fmt::Display for Spark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Spark::Exact(s) => write!(f, "{s}"),
            Spark::GreaterThan(s) => write!(f, "> {s}"),
        }
    }
}

fn small_min_singular(a: &DMatrix<C64>) -> f64 {
    a.clone().svd(false, false).singular_values.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Determinant of a small Hermitian positive semidefinite matrix by Cholesky,
/// or `None` when a pivot is not positive.
fn gram_determinant(g: &DMatrix<C64>, idx: &[usize], work: &mut DMatrix<C64>) -> Option<f64> {
    let s = idx.len();
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            work[(a, b)] = g[(i, j)];
        }
    }
    let mut det = 1.0;
    for j in 0..s {
        let mut d = work[(j, j)].re;
        for k in 0..j {
            d -= work[(j, k)].norm_sqr();
        }
        if d <= 0.0 {
            return None;
        }
        let l = d.sqrt();
        work[(j, j)] = C64::new(l, 0.0);
        for i in j + 1..s {
            let mut acc = work[(i, j)];
            for k in 0..j {
                acc -= work[(i, k)] * work[(j, k)].conj();
            }
            work[(i, j)] = acc / l;
        }
        det *= d;
    }
    Some(det)
}

/// Smallest number of linearly dependent columns, found by enumerating column
/// subsets of increasing size up to `limit`. A subset is dependent when its
/// smallest singular value is at most `SPARK_RANK_TOL * ||D||_2`. If the
/// enumeration budget runs out first, the certified lower bound is returned.
pub fn empirical_spark<D: SensingMatrix + ?Sized>(d: &D, limit: usize) -> Spark {
    let dense = d.to_dense();
    let n = dense.ncols();
    let rows = dense.nrows();
    if n == 0 {
        return Spark::GreaterThan(0);
    }
    let tol = SPARK_RANK_TOL * spectral_norm(&dense);
    let tol2 = tol * tol;
    let gram = dense.adjoint() * &dense;
    let limit = limit.min(n);
    let mut budget = ENUMERATION_LIMIT;
    for size in 1..=limit {
        if size > rows {
            return Spark::Exact(size);
        }
        let count = binomial(n, size);
        if count > budget {
            return Spark::GreaterThan(size - 1);
        }
        budget -= count;
        let mut idx: Vec<usize> = (0..size).collect();
        let mut work = DMatrix::<C64>::zeros(size, size);
        loop {
            // sigma_min^2 >= det / ||D_S||_F^(2(s-1)) certifies independence cheaply.
            let frob2: f64 = idx.iter().map(|&j| gram[(j, j)].re).sum();
            let certified = match gram_determinant(&gram, &idx, &mut work) {
                Some(det) => det / frob2.powi(size as i32 - 1) > tol2,
                None => false,
            };
            if !certified && small_min_singular(&dense.select_columns(&idx)) <= tol {
                return Spark::Exact(size);
            }
            if !next_combination(&mut idx, n) {
                break;
            }
        }
    }
    Spark::GreaterThan(limit)
}

/// Mean-level noise norm: sqrt(M_eff) * sigma.
pub fn noise_norm_bound(m_eff: usize, sigma: f64) -> f64 {
    (m_eff as f64).sqrt() * sigma
}

/// Deviation tail exp(-eps^2 / 2) of a 1-Lipschitz function of a Gaussian vector.
pub fn concentration_tail(eps: f64) -> f64 {
    (-0.5 * eps * eps).exp()
}

/// Modulus integrals entering the greedy error bounds, tabulated over array
/// elements and pixels. They do not depend on frequency.
#[derive(Debug, Clone)]
pub struct ModulusIntegrals {
    /// Entry (m, l): integral of d(node, r_l)^-1/2 * d(e_m, node)^-3/2.
    receive: DMatrix<f64>,
    /// Entry (p, l): integral of d(e_p, node)^-1/2 * |z_l - z_hat| * d(node, r_l)^-3/2.
    transmit: DMatrix<f64>,
    interface_depth: f64,
    c: f64,
    v: f64,
}

impl ModulusIntegrals {
    pub fn compute(medium: &TwoLayerMedium, geometry: &ArrayGeometry, grid: &ImagingGrid, quad: &QuadratureSpec) -> Self {
        let nodes = InterfaceNodes::new(geometry, medium, quad);
        let zh = medium.interface_depth;
        let m_count = geometry.element_count();
        // Element-side factors share the node weights.
        let mut elem_rx = Vec::with_capacity(m_count);
        let mut elem_tx = Vec::with_capacity(m_count);
        for m in 0..m_count {
            let e = geometry.element(m);
            let mut rx = Vec::with_capacity(nodes.len());
            let mut tx = Vec::with_capacity(nodes.len());
            for k in 0..nodes.len() {
                let dx = nodes.x[k] - e.x;
                let dz = zh - e.z;
                let d = (dx * dx + dz * dz).sqrt();
                let inv_sqrt = 1.0 / d.sqrt();
                rx.push(nodes.weight[k] * inv_sqrt / d);
                tx.push(nodes.weight[k] * inv_sqrt);
            }
            elem_rx.push(rx);
            elem_tx.push(tx);
        }
        let n = grid.len();
        let mut receive = DMatrix::zeros(m_count, n);
        let mut transmit = DMatrix::zeros(m_count, n);
        let mut a = vec![0.0; nodes.len()];
        let mut b = vec![0.0; nodes.len()];
        for l in 0..n {
            let r = grid.pixel(l);
            let depth = (r.z - zh).abs();
            for k in 0..nodes.len() {
                let dx = r.x - nodes.x[k];
                let dz = r.z - zh;
                let d = (dx * dx + dz * dz).sqrt();
                let inv_sqrt = 1.0 / d.sqrt();
                a[k] = inv_sqrt;
                b[k] = depth * inv_sqrt / d;
            }
            for m in 0..m_count {
                receive[(m, l)] = dot(&elem_rx[m], &a);
                transmit[(m, l)] = dot(&elem_tx[m], &b);
            }
        }
        ModulusIntegrals { receive, transmit, interface_depth: zh, c: medium.c, v: medium.v }
    }

    pub fn elements(&self) -> usize {
        self.receive.nrows()
    }

    pub fn pixels(&self) -> usize {
        self.receive.ncols()
    }

    pub fn receive(&self, m: usize, l: usize) -> f64 {
        self.receive[(m, l)]
    }

    pub fn transmit(&self, p: usize, l: usize) -> f64 {
        self.transmit[(p, l)]
    }

    fn check(&self, index: usize, len: usize) -> Result<()> {
        if index >= len {
            return Err(Error::Index { index: index + 1, len });
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Value of a greedy error bound and the extremizing indices (0-based).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OgaBound {
    pub value: f64,
    pub element: usize,
    pub transmitter: Option<usize>,
    pub pixel: usize,
    pub denominator: f64,
}

fn guarded(numerator: f64, denominator: f64) -> Result<f64> {
    if !(denominator.is_finite() && denominator > INTEGRAL_GUARD) {
        return Err(Error::DegenerateGeometry { value: denominator });
    }
    Ok(numerator / denominator)
}

/// Single-transmitter greedy error bound sqrt(kM) sigma / (w |z_hat| / 4 pi c * I(m, l)).
/// With `at = None` the (m, l) pair with the smallest integral is used, giving
/// the largest bound.
pub fn oga_error_bound_simo(
    k: usize,
    sigma: f64,
    omega: f64,
    at: Option<(usize, usize)>,
    integrals: &ModulusIntegrals,
) -> Result<OgaBound> {
    if sigma < 0.0 {
        return Err(Error::Parameter(format!("sigma must be nonnegative, got {sigma}")));
    }
    let (m, l) = match at {
        Some((m, l)) => {
            integrals.check(m, integrals.elements())?;
            integrals.check(l, integrals.pixels())?;
            (m, l)
        }
        None => argmin(&integrals.receive),
    };
    let m_count = integrals.elements() as f64;
    let scale = omega * integrals.interface_depth.abs() / (4.0 * PI * integrals.c);
    let denominator = scale * integrals.receive(m, l);
    let value = guarded((k as f64 * m_count).sqrt() * sigma, denominator)?;
    Ok(OgaBound { value, element: m, transmitter: None, pixel: l, denominator })
}

/// Full-matrix greedy error bound
/// sqrt(k) M sigma / (w^2 |z_hat| / 16 pi^2 c v * I(m, l) * J(p, l)).
pub fn oga_error_bound_mimo(
    k: usize,
    sigma: f64,
    omega: f64,
    at: Option<(usize, usize, usize)>,
    integrals: &ModulusIntegrals,
) -> Result<OgaBound> {
    if sigma < 0.0 {
        return Err(Error::Parameter(format!("sigma must be nonnegative, got {sigma}")));
    }
    let (m, p, l) = match at {
        Some((m, p, l)) => {
            integrals.check(m, integrals.elements())?;
            integrals.check(p, integrals.elements())?;
            integrals.check(l, integrals.pixels())?;
            (m, p, l)
        }
        None => {
            let mut best = (0, 0, 0, f64::INFINITY);
            for l in 0..integrals.pixels() {
                let (m, rx) = column_min(&integrals.receive, l);
                let (p, tx) = column_min(&integrals.transmit, l);
                if rx * tx < best.3 {
                    best = (m, p, l, rx * tx);
                }
            }
            (best.0, best.1, best.2)
        }
    };
    let m_count = integrals.elements() as f64;
    let scale = omega * omega * integrals.interface_depth.abs() / (16.0 * PI * PI * integrals.c * integrals.v);
    let denominator = scale * integrals.receive(m, l) * integrals.transmit(p, l);
    let value = guarded((k as f64).sqrt() * m_count * sigma, denominator)?;
    Ok(OgaBound { value, element: m, transmitter: Some(p), pixel: l, denominator })
}

fn column_min(a: &DMatrix<f64>, l: usize) -> (usize, f64) {
    a.column(l).iter().cloned().enumerate().fold((0, f64::INFINITY), |acc, (i, x)| if x < acc.1 { (i, x) } else { acc })
}

fn argmin(a: &DMatrix<f64>) -> (usize, usize) {
    let mut best = (0, 0, f64::INFINITY);
    for l in 0..a.ncols() {
        let (m, x) = column_min(a, l);
        if x < best.2 {
            best = (m, l, x);
        }
    }
    (best.0, best.1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NspConstant {
    pub rho: f64,
    /// Spectral norm of the support columns.
    pub support_norm: f64,
    /// Induced 1-norm of the off-support columns.
    pub off_support_norm: f64,
}

impl NspConstant {
    pub fn holds(&self) -> bool {
        self.rho < 1.0
    }
}

/// rho = sqrt(k) ||D_ns||_1 / ||D_s||_2.
pub fn nsp_constant(support: &DMatrix<C64>, off_support: &DMatrix<C64>, k: usize) -> Result<NspConstant> {
    if support.ncols() == 0 || k == 0 {
        return Err(Error::Parameter("support partition is empty".into()));
    }
    if off_support.ncols() > 0 && off_support.nrows() != support.nrows() {
        return Err(Error::Parameter(format!("partition row counts differ ({} vs {})", support.nrows(), off_support.nrows())));
    }
    let support_norm = spectral_norm(support);
    if support_norm == 0.0 {
        return Err(Error::Parameter("support columns are all zero".into()));
    }
    let off_support_norm = max_column_sum(off_support);
    let rho = (k as f64).sqrt() * off_support_norm / support_norm;
    Ok(NspConstant { rho, support_norm, off_support_norm })
}

/// [`nsp_constant`] for the partition of `d` into the columns `support` and
/// the rest, without forming the off-support block.
pub fn nsp_constant_columns<D: SensingMatrix + ?Sized>(d: &D, support: &[usize], k: usize) -> Result<NspConstant> {
    if let Some(&bad) = support.iter().find(|&&j| j >= d.cols()) {
        return Err(Error::Index { index: bad, len: d.cols() });
    }
    let s = d.submatrix(support);
    if s.ncols() == 0 || k == 0 {
        return Err(Error::Parameter("support partition is empty".into()));
    }
    let support_norm = spectral_norm(&s);
    if support_norm == 0.0 {
        return Err(Error::Parameter("support columns are all zero".into()));
    }
    let off_support_norm = (0..d.cols())
        .filter(|j| !support.contains(j))
        .map(|j| d.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let rho = (k as f64).sqrt() * off_support_norm / support_norm;
    Ok(NspConstant { rho, support_norm, off_support_norm })
}

/// Bound on ||s' - s'_0||_1 for peak-normalized unknowns:
/// [(S + sqrt(k) T) sqrt(N/k) N + 4 tau S sqrt(M_eff) sigma] / (S - sqrt(k) T)
/// with S = ||D_s||_2 and T = ||D_ns||_1.
pub fn l1_error_bound(
    support: &DMatrix<C64>,
    off_support: &DMatrix<C64>,
    k: usize,
    n: usize,
    m_eff: usize,
    sigma: f64,
    tau: f64,
) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::Parameter(format!("tau must be positive, got {tau}")));
    }
    if sigma < 0.0 {
        return Err(Error::Parameter(format!("sigma must be nonnegative, got {sigma}")));
    }
    let nsp = nsp_constant(support, off_support, k)?;
    l1_error_bound_from(&nsp, k, n, m_eff, sigma, tau)
}

pub fn l1_error_bound_from(nsp: &NspConstant, k: usize, n: usize, m_eff: usize, sigma: f64, tau: f64) -> Result<f64> {
    if !nsp.holds() {
        return Err(Error::BoundInapplicable { rho: nsp.rho });
    }
    let s = nsp.support_norm;
    let t = (k as f64).sqrt() * nsp.off_support_norm;
    let denominator = s - t;
    if !(denominator > 0.0) {
        return Err(Error::BoundInapplicable { rho: nsp.rho });
    }
    let n = n as f64;
    let value = ((s + t) * (n / k as f64).sqrt() * n + 4.0 * tau * s * noise_norm_bound(m_eff, sigma)) / denominator;
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::complex_gaussian_matrix;

    #[test]
    fn uniqueness_examples() {
        let r = uniqueness_check(64, 3, 1600, Mode::Simo);
        assert!(r.unique);
        assert!(!uniqueness_check(2, 1, 10, Mode::Simo).unique);
        let r = uniqueness_check(8, 3, 100, Mode::Mimo);
        assert_eq!(r.measurements, 64);
        assert!(r.unique);
        let text = uniqueness_check(64, 3, 1600, Mode::Simo).report().to_string();
        assert!(text.lines().nth(1).unwrap().starts_with("M > 2L"));
        assert!(text.lines().nth(1).unwrap().ends_with("pass"));
    }

    #[test]
    fn spark_of_orthogonal_and_duplicated_columns() {
        let id = DMatrix::<C64>::identity(5, 5);
        assert_eq!(empirical_spark(&id, 4), Spark::GreaterThan(4));
        assert_eq!(empirical_spark(&id, 9), Spark::GreaterThan(5));
        // Any M + 1 columns in M rows are dependent.
        let wide = complex_gaussian_matrix(5, 7, 1);
        assert_eq!(empirical_spark(&wide, 7), Spark::Exact(6));
        let mut d = complex_gaussian_matrix(6, 8, 2);
        let c = d.column(1).into_owned();
        d.set_column(5, &(c * C64::new(0.0, 2.0)));
        assert_eq!(empirical_spark(&d, 6), Spark::Exact(2));
    }

    #[test]
    fn spark_guard_returns_bound() {
        let d = complex_gaussian_matrix(30, 60, 4);
        // C(60, 4) alone exceeds the enumeration budget.
        assert_eq!(empirical_spark(&d, 10), Spark::GreaterThan(3));
    }

    #[test]
    fn noise_bound_examples() {
        assert_eq!(noise_norm_bound(64, 0.0), 0.0);
        assert_eq!(noise_norm_bound(64, 1.0), 8.0);
        assert_eq!(noise_norm_bound(64 * 64, 1.0), 64.0);
    }

    #[test]
    fn nsp_examples() {
        let s = DMatrix::<C64>::identity(3, 1);
        let z = DMatrix::<C64>::zeros(3, 4);
        assert_eq!(nsp_constant(&s, &z, 1).unwrap().rho, 0.0);
        let ns = DMatrix::from_column_slice(3, 1, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let rho = nsp_constant(&s, &ns, 1).unwrap();
        assert_eq!(rho.rho, 1.0);
        assert!(!rho.holds());
        assert!(matches!(nsp_constant(&DMatrix::zeros(3, 0), &ns, 1), Err(Error::Parameter(_))));
    }

    #[test]
    fn l1_bound_collapses_without_noise_and_off_support() {
        let s = DMatrix::<C64>::identity(4, 2);
        let z = DMatrix::<C64>::zeros(4, 18);
        let b = l1_error_bound(&s, &z, 2, 20, 4, 0.0, 1.0).unwrap();
        assert!((b - (10.0f64).sqrt() * 20.0).abs() < 1e-12);
    }

    #[test]
    fn l1_bound_diverges_towards_unit_rho() {
        let s = DMatrix::<C64>::identity(3, 1);
        let mut prev = 0.0;
        for eps in [1e-1, 1e-3, 1e-6] {
            let ns = DMatrix::from_column_slice(3, 1, &[C64::new(0.0, 0.0), C64::new(1.0 - eps, 0.0), C64::new(0.0, 0.0)]);
            let b = l1_error_bound(&s, &ns, 1, 10, 3, 0.1, 1.0).unwrap();
            assert!(b > prev);
            prev = b;
        }
        assert!(prev > 1e6);
        let ns = DMatrix::from_column_slice(3, 1, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        assert!(matches!(l1_error_bound(&s, &ns, 1, 10, 3, 0.1, 1.0), Err(Error::BoundInapplicable { .. })));
    }

    fn small_setup() -> (TwoLayerMedium, ArrayGeometry, ImagingGrid, QuadratureSpec) {
        let medium = TwoLayerMedium::new(1482.0, 6400.0, 0.01).unwrap();
        let geometry = ArrayGeometry::uniform(6, 0.6e-3).unwrap();
        let grid = ImagingGrid::with_spacing(5, 4, 0.0, 0.015, 0.5e-3, &medium).unwrap();
        let quad = QuadratureSpec::default_for(&geometry, &medium, 5e6);
        (medium, geometry, grid, quad)
    }

    #[test]
    fn oga_bounds_scale_as_stated() {
        let (medium, geometry, grid, quad) = small_setup();
        let ints = ModulusIntegrals::compute(&medium, &geometry, &grid, &quad);
        let w = 2.0 * PI * 5e6;
        assert_eq!(oga_error_bound_simo(2, 0.0, w, None, &ints).unwrap().value, 0.0);
        assert_eq!(oga_error_bound_mimo(2, 0.0, w, None, &ints).unwrap().value, 0.0);
        let b1 = oga_error_bound_simo(1, 0.3, w, None, &ints).unwrap();
        let b4 = oga_error_bound_simo(4, 0.3, w, None, &ints).unwrap();
        assert!((b4.value / b1.value - 2.0).abs() < 1e-12);
        let m1 = oga_error_bound_mimo(1, 0.3, w, None, &ints).unwrap();
        let m2 = oga_error_bound_mimo(1, 0.3, 2.0 * w, None, &ints).unwrap();
        assert!((m1.value / m2.value - 4.0).abs() < 1e-12);
        // The scan picks the largest bound.
        for m in 0..6 {
            for l in 0..grid.len() {
                assert!(oga_error_bound_simo(1, 0.3, w, Some((m, l)), &ints).unwrap().value <= b1.value);
            }
        }
    }

    #[test]
    fn zero_frequency_is_degenerate() {
        let (medium, geometry, grid, quad) = small_setup();
        let ints = ModulusIntegrals::compute(&medium, &geometry, &grid, &quad);
        assert!(matches!(oga_error_bound_simo(1, 1.0, 0.0, None, &ints), Err(Error::DegenerateGeometry { .. })));
        assert!(matches!(oga_error_bound_simo(1, 1.0, 1.0, Some((6, 0)), &ints), Err(Error::Index { .. })));
    }
}
