//! Sensing matrices over the imaging grid.
//!
//! Every column has the form `w ⊗ a`: `a` is the receive steering vector of
//! a pixel and `w` a per-pixel transmit weight (a single 1 for SIMO, one
//! transmit integral for a fixed transmitter, all M transmit integrals for
//! full-matrix capture). Dictionaries are kept in this factored form, so a
//! 4096 x 6400 unknown-velocity matrix costs two 64 x 1600 tables per block.
//! Rows are ordered `p * M + m`, matching the stacked dataset vector.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::norm2;
use crate::model::{ArrayGeometry, ImagingGrid, TwoLayerMedium, C64};
use crate::propagation::{QuadratureSpec, SteeringTables};

/// Linear map interface shared by dense matrices and factored dictionaries.
pub trait SensingMatrix {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn column(&self, j: usize) -> DVector<C64>;
    /// `D x`.
    fn apply(&self, x: &[C64]) -> DVector<C64>;
    /// `D^H r`.
    fn apply_adjoint(&self, r: &[C64]) -> DVector<C64>;

    fn column_norms(&self) -> Vec<f64> {
        (0..self.cols()).map(|j| norm2(self.column(j).as_slice())).collect()
    }

    /// Column `j` of `D^H D`.
    fn gram_column(&self, j: usize) -> DVector<C64> {
        self.apply_adjoint(self.column(j).as_slice())
    }

    /// Columns `idx` gathered into a dense matrix.
    fn submatrix(&self, idx: &[usize]) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(self.rows(), idx.len());
        for (c, &j) in idx.iter().enumerate() {
            out.set_column(c, &self.column(j));
        }
        out
    }

    fn to_dense(&self) -> DMatrix<C64> {
        self.submatrix(&(0..self.cols()).collect::<Vec<_>>())
    }

    /// (n_x, n_z) of the grid behind one column block.
    fn grid_shape(&self) -> (usize, usize) {
        (self.cols(), 1)
    }
}

impl SensingMatrix for DMatrix<C64> {
    fn rows(&self) -> usize {
        self.nrows()
    }

    fn cols(&self) -> usize {
        self.ncols()
    }

    fn column(&self, j: usize) -> DVector<C64> {
        DMatrix::column(self, j).into_owned()
    }

    fn apply(&self, x: &[C64]) -> DVector<C64> {
        self * DVector::from_column_slice(x)
    }

    fn apply_adjoint(&self, r: &[C64]) -> DVector<C64> {
        self.ad_mul(&DVector::from_column_slice(r))
    }

    fn to_dense(&self) -> DMatrix<C64> {
        self.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DictionaryKind {
    /// Receive-only steering vectors, M x N.
    Simo,
    /// Receive steering scaled by the transmit integral of one element, M x N.
    Transmitter(usize),
    /// All transmit/receive pairs stacked, M^2 x N.
    Mimo,
    /// One MIMO block per trial velocity, M^2 x (N R).
    MimoUv,
}

/// Whether builders reject grids with too few pixels for the sparse model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RegimePolicy {
    #[default]
    Strict,
    Relaxed,
}

#[derive(Debug, Clone)]
struct Block {
    velocity: f64,
    rx: Arc<SteeringTables>,
    /// P x N transmit weights.
    weights: DMatrix<C64>,
}

#[derive(Debug, Clone)]
pub struct Dictionary {
    kind: DictionaryKind,
    omega: f64,
    n_x: usize,
    n_z: usize,
    elements: usize,
    blocks: Vec<Block>,
    quad: QuadratureSpec,
}

impl Dictionary {
    pub fn kind(&self) -> DictionaryKind {
        self.kind
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn velocities(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.velocity).collect()
    }

    pub fn pixels(&self) -> usize {
        self.n_x * self.n_z
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn quadrature(&self) -> &QuadratureSpec {
        &self.quad
    }

    /// Steering tables behind block `q`.
    pub fn tables(&self, q: usize) -> &SteeringTables {
        &self.blocks[q].rx
    }

    fn split_col(&self, j: usize) -> (usize, usize) {
        (j / self.pixels(), j % self.pixels())
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        let (q, l) = self.split_col(col);
        let (p, m) = (row / self.elements, row % self.elements);
        let b = &self.blocks[q];
        b.rx.rx[(m, l)] * b.weights[(p, l)]
    }

    /// Sub-dictionary made of block `q` only.
    pub fn block(&self, q: usize) -> Dictionary {
        Dictionary {
            kind: if self.kind == DictionaryKind::MimoUv { DictionaryKind::Mimo } else { self.kind },
            blocks: vec![self.blocks[q].clone()],
            ..self.clone()
        }
    }

    /// Row block of a MIMO dictionary belonging to transmitter `p`.
    pub fn transmitter_block(&self, p: usize) -> Result<Dictionary> {
        if self.kind != DictionaryKind::Mimo {
            return Err(Error::Parameter("transmitter blocks exist only for MIMO dictionaries".into()));
        }
        let b = &self.blocks[0];
        Ok(Dictionary {
            kind: DictionaryKind::Transmitter(p),
            blocks: vec![Block { velocity: b.velocity, rx: b.rx.clone(), weights: b.weights.rows(p, 1).into_owned() }],
            ..self.clone()
        })
    }
}

impl SensingMatrix for Dictionary {
    fn rows(&self) -> usize {
        self.elements * self.blocks[0].weights.nrows()
    }

    fn cols(&self) -> usize {
        self.pixels() * self.blocks.len()
    }

    fn column(&self, j: usize) -> DVector<C64> {
        let (q, l) = self.split_col(j);
        let b = &self.blocks[q];
        let a = b.rx.rx.column(l);
        let w = b.weights.column(l);
        let m = self.elements;
        DVector::from_fn(self.rows(), |row, _| a[row % m] * w[row / m])
    }

    fn apply(&self, x: &[C64]) -> DVector<C64> {
        let n = self.pixels();
        let m = self.elements;
        let p = self.blocks[0].weights.nrows();
        let mut out = DMatrix::<C64>::zeros(m, p);
        for (q, b) in self.blocks.iter().enumerate() {
            let xs = &x[q * n..(q + 1) * n];
            if xs.iter().all(|z| *z == C64::new(0.0, 0.0)) {
                continue;
            }
            let mut scaled = b.rx.rx.clone();
            for (l, &xl) in xs.iter().enumerate() {
                scaled.column_mut(l).iter_mut().for_each(|z| *z *= xl);
            }
            out.gemm(C64::new(1.0, 0.0), &scaled, &b.weights.transpose(), C64::new(1.0, 0.0));
        }
        DVector::from_column_slice(out.as_slice())
    }

    fn apply_adjoint(&self, r: &[C64]) -> DVector<C64> {
        let n = self.pixels();
        let m = self.elements;
        let p = self.blocks[0].weights.nrows();
        let rm = DMatrix::from_column_slice(m, p, r);
        let mut out = DVector::zeros(self.cols());
        for (q, b) in self.blocks.iter().enumerate() {
            let z = &rm * b.weights.map(|w| w.conj());
            for l in 0..n {
                out[q * n + l] = b.rx.rx.column(l).dotc(&z.column(l));
            }
        }
        out
    }

    fn column_norms(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.cols());
        for b in &self.blocks {
            for l in 0..self.pixels() {
                out.push(b.rx.rx.column(l).norm() * b.weights.column(l).norm());
            }
        }
        out
    }

    fn grid_shape(&self) -> (usize, usize) {
        (self.n_x, self.n_z)
    }

    /// Uses `(w ⊗ a)^H (w' ⊗ a') = (w^H w')(a^H a')`.
    fn gram_column(&self, j: usize) -> DVector<C64> {
        let (q, l) = self.split_col(j);
        let a = self.blocks[q].rx.rx.column(l);
        let w = self.blocks[q].weights.column(l);
        let n = self.pixels();
        let mut out = DVector::zeros(self.cols());
        for (qq, b) in self.blocks.iter().enumerate() {
            let ga = b.rx.rx.ad_mul(&a);
            let gw = b.weights.ad_mul(&w);
            for i in 0..n {
                out[qq * n + i] = ga[i] * gw[i];
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey(Vec<u64>);

impl CacheKey {
    fn new(
        grid: &ImagingGrid,
        geometry: &ArrayGeometry,
        medium: &TwoLayerMedium,
        quad: &QuadratureSpec,
        omega: f64,
        v: f64,
    ) -> Self {
        let (x0, x1, z0, z1) = grid.extent();
        let mut k = vec![grid.n_x() as u64, grid.n_z() as u64, geometry.element_count() as u64];
        k.extend(
            [
                x0,
                x1,
                z0,
                z1,
                geometry.pitch(),
                medium.c,
                medium.interface_depth,
                quad.half_width,
                quad.step,
                quad.taper,
                omega,
                v,
            ]
            .iter()
            .map(|f| f.to_bits()),
        );
        CacheKey(k)
    }
}

/// Memo of steering tables keyed by everything they depend on.
#[derive(Debug, Default)]
pub struct DictionaryCache {
    tables: Mutex<HashMap<CacheKey, Arc<SteeringTables>>>,
}

impl DictionaryCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.tables.lock().map(|t| t.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Tables for (omega, v). A cached entry without transmit data is
    /// rebuilt when transmit data is requested.
    pub fn get(
        &self,
        omega: f64,
        grid: &ImagingGrid,
        medium: &TwoLayerMedium,
        geometry: &ArrayGeometry,
        quad: &QuadratureSpec,
        with_tx: bool,
    ) -> Result<Arc<SteeringTables>> {
        let key = CacheKey::new(grid, geometry, medium, quad, omega, medium.v);
        if let Some(t) = self.tables.lock().map_err(|_| Error::Numeric("cache lock poisoned".into()))?.get(&key) {
            if t.tx.is_some() || !with_tx {
                return Ok(t.clone());
            }
        }
        let built = Arc::new(SteeringTables::build(omega, &grid.pixels(), medium, geometry, quad, with_tx)?);
        let mut map = self.tables.lock().map_err(|_| Error::Numeric("cache lock poisoned".into()))?;
        let entry = map.entry(key).or_insert_with(|| built.clone());
        if with_tx && entry.tx.is_none() {
            *entry = built.clone();
        }
        Ok(entry.clone())
    }
}

/// Builds dictionaries for a fixed grid, array, medium and quadrature.
#[derive(Debug, Clone)]
pub struct DictionaryBuilder<'a> {
    pub grid: &'a ImagingGrid,
    pub medium: &'a TwoLayerMedium,
    pub geometry: &'a ArrayGeometry,
    pub quad: &'a QuadratureSpec,
    pub policy: RegimePolicy,
    pub cache: Option<&'a DictionaryCache>,
}

impl<'a> DictionaryBuilder<'a> {
    pub fn new(grid: &'a ImagingGrid, medium: &'a TwoLayerMedium, geometry: &'a ArrayGeometry, quad: &'a QuadratureSpec) -> Self {
        DictionaryBuilder { grid, medium, geometry, quad, policy: RegimePolicy::Strict, cache: None }
    }

    pub fn policy(mut self, policy: RegimePolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn cache(mut self, cache: &'a DictionaryCache) -> Self {
        self.cache = Some(cache);
        self
    }

    fn check_regime(&self, kind: &'static str, rows: usize) -> Result<()> {
        let pixels = self.grid.len();
        if self.policy == RegimePolicy::Strict && pixels <= rows {
            return Err(Error::SparsityRegime { kind, pixels, rows });
        }
        Ok(())
    }

    fn tables(&self, omega: f64, medium: &TwoLayerMedium, with_tx: bool) -> Result<Arc<SteeringTables>> {
        match self.cache {
            Some(c) => c.get(omega, self.grid, medium, self.geometry, self.quad, with_tx),
            None => Ok(Arc::new(SteeringTables::build(omega, &self.grid.pixels(), medium, self.geometry, self.quad, with_tx)?)),
        }
    }

    /// Receive steering table for every pixel, without any regime check.
    pub fn receive_tables(&self, omega: f64) -> Result<Arc<SteeringTables>> {
        self.tables(omega, self.medium, false)
    }

    /// Receive and transmit tables for every pixel.
    pub fn full_tables(&self, omega: f64) -> Result<Arc<SteeringTables>> {
        self.tables(omega, self.medium, true)
    }

    fn assemble(&self, kind: DictionaryKind, omega: f64, blocks: Vec<Block>) -> Dictionary {
        Dictionary {
            kind,
            omega,
            n_x: self.grid.n_x(),
            n_z: self.grid.n_z(),
            elements: self.geometry.element_count(),
            blocks,
            quad: *self.quad,
        }
    }

    /// Receive-only steering vectors.
    pub fn phi_simo(&self, omega: f64) -> Result<Dictionary> {
        self.check_regime("SIMO", self.geometry.element_count())?;
        let rx = self.tables(omega, self.medium, false)?;
        let weights = DMatrix::from_element(1, self.grid.len(), C64::new(1.0, 0.0));
        Ok(self.assemble(DictionaryKind::Simo, omega, vec![Block { velocity: self.medium.v, rx, weights }]))
    }

    /// Receive steering times the transmit integral of element `p` (0-based).
    pub fn phi_transmitter(&self, omega: f64, p: usize) -> Result<Dictionary> {
        let m = self.geometry.element_count();
        if p >= m {
            return Err(Error::Index { index: p + 1, len: m });
        }
        self.check_regime("SIMO", m)?;
        let rx = self.tables(omega, self.medium, true)?;
        let weights = rx.tx()?.rows(p, 1).into_owned();
        Ok(self.assemble(DictionaryKind::Transmitter(p), omega, vec![Block { velocity: self.medium.v, rx, weights }]))
    }

    fn mimo_block(&self, omega: f64, medium: &TwoLayerMedium) -> Result<Block> {
        let rx = self.tables(omega, medium, true)?;
        let weights = rx.tx()?.clone();
        Ok(Block { velocity: medium.v, rx, weights })
    }

    /// Full-matrix-capture dictionary.
    pub fn phi_mimo(&self, omega: f64) -> Result<Dictionary> {
        let m = self.geometry.element_count();
        self.check_regime("MIMO", m * m)?;
        Ok(self.assemble(DictionaryKind::Mimo, omega, vec![self.mimo_block(omega, self.medium)?]))
    }

    /// One MIMO block per trial velocity, in the given order.
    pub fn psi(&self, omega: f64, velocities: &[f64]) -> Result<Dictionary> {
        if velocities.is_empty() {
            return Err(Error::config("method.velocities", "need at least one trial velocity"));
        }
        for (i, v) in velocities.iter().enumerate() {
            if !(*v > 0.0 && v.is_finite()) {
                return Err(Error::config("method.velocities", format!("velocity {v} must be positive")));
            }
            if velocities[..i].contains(v) {
                return Err(Error::config("method.velocities", format!("duplicate velocity {v}")));
            }
        }
        let m = self.geometry.element_count();
        self.check_regime("MIMO", m * m)?;
        let blocks =
            velocities.iter().map(|&v| self.mimo_block(omega, &self.medium.with_velocity(v)?)).collect::<Result<Vec<_>>>()?;
        Ok(self.assemble(DictionaryKind::MimoUv, omega, blocks))
    }
}

pub fn build_phi_simo(
    omega: f64,
    grid: &ImagingGrid,
    medium: &TwoLayerMedium,
    geometry: &ArrayGeometry,
    quad: &QuadratureSpec,
) -> Result<Dictionary> {
    DictionaryBuilder::new(grid, medium, geometry, quad).phi_simo(omega)
}

pub fn build_phi_mimo(
    omega: f64,
    grid: &ImagingGrid,
    medium: &TwoLayerMedium,
    geometry: &ArrayGeometry,
    quad: &QuadratureSpec,
) -> Result<Dictionary> {
    DictionaryBuilder::new(grid, medium, geometry, quad).phi_mimo(omega)
}

pub fn build_psi(
    omega: f64,
    grid: &ImagingGrid,
    medium: &TwoLayerMedium,
    geometry: &ArrayGeometry,
    velocities: &[f64],
    quad: &QuadratureSpec,
) -> Result<Dictionary> {
    DictionaryBuilder::new(grid, medium, geometry, quad).psi(omega, velocities)
}
