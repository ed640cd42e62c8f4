//! Domain types shared by every stage: array, medium, grid, scene,
//! frequency bins, datasets and recovered images.
//!
//! Coordinates: x runs along the array, z points down, and the origin sits
//! on the leftmost element. Library indices are 0-based except where a
//! function says otherwise.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub z: f64,
}

impl Point {
    pub const fn new(x: f64, z: f64) -> Self {
        Point { x, z }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        let (dx, dz) = (self.x - other.x, self.z - other.z);
        (dx * dx + dz * dz).sqrt()
    }
}

/// Uniform linear array on the line z = 0 with element 0 at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    pitch: f64,
    element_x: Vec<f64>,
}

impl ArrayGeometry {
    pub fn uniform(element_count: usize, pitch: f64) -> Result<Self> {
        if element_count < 2 {
            return Err(Error::config("array.elements", format!("need at least 2 elements, got {element_count}")));
        }
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(Error::config("array.pitch", format!("must be positive, got {pitch}")));
        }
        let element_x = (0..element_count).map(|m| m as f64 * pitch).collect();
        Ok(ArrayGeometry { pitch, element_x })
    }

    pub fn element_count(&self) -> usize {
        self.element_x.len()
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn element_x(&self) -> &[f64] {
        &self.element_x
    }

    pub fn element(&self, m: usize) -> Point {
        Point::new(self.element_x[m], 0.0)
    }

    /// Distance between the outermost element centres.
    pub fn aperture(&self) -> f64 {
        self.element_x[self.element_x.len() - 1] - self.element_x[0]
    }

    pub fn midline(&self) -> f64 {
        0.5 * (self.element_x[0] + self.element_x[self.element_x.len() - 1])
    }
}

/// Water layer (speed `c`) over a solid (speed `v`) with a flat interface at
/// depth `interface_depth`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLayerMedium {
    pub c: f64,
    pub v: f64,
    pub interface_depth: f64,
}

impl TwoLayerMedium {
    pub fn new(c: f64, v: f64, interface_depth: f64) -> Result<Self> {
        for (name, value) in [("medium.c", c), ("medium.v", v), ("medium.interface_depth", interface_depth)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::config(name, format!("must be positive, got {value}")));
            }
        }
        Ok(TwoLayerMedium { c, v, interface_depth })
    }

    pub fn with_velocity(&self, v: f64) -> Result<Self> {
        TwoLayerMedium::new(self.c, v, self.interface_depth)
    }
}

/// Convert a 1-based pixel index into 1-based (row, column) = (depth, lateral).
pub fn pixel_index_to_grid(l: usize, n_x: usize, n_pixels: usize) -> Result<(usize, usize)> {
    if l == 0 || l > n_pixels || n_x == 0 {
        return Err(Error::Index { index: l, len: n_pixels });
    }
    let i = (l - 1) / n_x + 1;
    let j = l - (i - 1) * n_x;
    Ok((i, j))
}

/// Inverse of [`pixel_index_to_grid`].
pub fn grid_to_pixel_index(i: usize, j: usize, n_x: usize, n_z: usize) -> Result<usize> {
    if i == 0 || i > n_z {
        return Err(Error::Index { index: i, len: n_z });
    }
    if j == 0 || j > n_x {
        return Err(Error::Index { index: j, len: n_x });
    }
    Ok((i - 1) * n_x + j)
}

/// Rectangular lattice of pixel centres, all strictly inside the solid.
/// Pixels are ordered row by row, lateral index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagingGrid {
    n_x: usize,
    n_z: usize,
    x_min: f64,
    x_max: f64,
    z_min: f64,
    z_max: f64,
}

impl ImagingGrid {
    pub fn new(n_x: usize, n_z: usize, x_min: f64, x_max: f64, z_min: f64, z_max: f64, medium: &TwoLayerMedium) -> Result<Self> {
        if n_x == 0 || n_z == 0 {
            return Err(Error::config("grid", format!("pixel counts must be positive, got {n_x}x{n_z}")));
        }
        if ![x_min, x_max, z_min, z_max].iter().all(|v| v.is_finite()) {
            return Err(Error::config("grid", "extent must be finite"));
        }
        if x_max < x_min || (n_x > 1 && x_max == x_min) {
            return Err(Error::config("grid.x_max", "must exceed grid.x_min"));
        }
        if z_max < z_min || (n_z > 1 && z_max == z_min) {
            return Err(Error::config("grid.z_max", "must exceed grid.z_min"));
        }
        if z_min <= medium.interface_depth {
            return Err(Error::config(
                "grid.z_min",
                format!("pixels must lie below the interface at {} m, got {z_min}", medium.interface_depth),
            ));
        }
        Ok(ImagingGrid { n_x, n_z, x_min, x_max, z_min, z_max })
    }

    /// Grid anchored at (x_min, z_min) with equal spacing in both directions.
    pub fn with_spacing(n_x: usize, n_z: usize, x_min: f64, z_min: f64, spacing: f64, medium: &TwoLayerMedium) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::config("grid.spacing", format!("must be positive, got {spacing}")));
        }
        let x_max = x_min + spacing * n_x.saturating_sub(1) as f64;
        let z_max = z_min + spacing * n_z.saturating_sub(1) as f64;
        ImagingGrid::new(n_x, n_z, x_min, x_max, z_min, z_max, medium)
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_z(&self) -> usize {
        self.n_z
    }

    pub fn len(&self) -> usize {
        self.n_x * self.n_z
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn extent(&self) -> (f64, f64, f64, f64) {
        (self.x_min, self.x_max, self.z_min, self.z_max)
    }

    pub fn dx(&self) -> f64 {
        if self.n_x > 1 {
            (self.x_max - self.x_min) / (self.n_x - 1) as f64
        } else {
            0.0
        }
    }

    pub fn dz(&self) -> f64 {
        if self.n_z > 1 {
            (self.z_max - self.z_min) / (self.n_z - 1) as f64
        } else {
            0.0
        }
    }

    /// Row (depth) and column (lateral) of 0-based pixel `l`.
    pub fn row_col(&self, l: usize) -> (usize, usize) {
        (l / self.n_x, l % self.n_x)
    }

    pub fn index_of(&self, row: usize, col: usize) -> usize {
        row * self.n_x + col
    }

    pub fn pixel(&self, l: usize) -> Point {
        let (row, col) = self.row_col(l);
        Point::new(self.x_min + col as f64 * self.dx(), self.z_min + row as f64 * self.dz())
    }

    pub fn pixels(&self) -> Vec<Point> {
        (0..self.len()).map(|l| self.pixel(l)).collect()
    }

    /// Index of the pixel whose centre is closest to `p` (lowest index on ties).
    pub fn nearest_pixel(&self, p: Point) -> usize {
        let mut best = (f64::INFINITY, 0);
        for l in 0..self.len() {
            let d = self.pixel(l).distance(&p);
            if d < best.0 {
                best = (d, l);
            }
        }
        best.1
    }

    /// Chebyshev distance in pixels between two grid cells.
    pub fn pixel_distance(&self, a: usize, b: usize) -> usize {
        let (ra, ca) = self.row_col(a);
        let (rb, cb) = self.row_col(b);
        ra.abs_diff(rb).max(ca.abs_diff(cb))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    pub position: Point,
    pub reflectivity: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScattererSet {
    scatterers: Vec<Scatterer>,
}

impl ScattererSet {
    pub fn new(scatterers: Vec<Scatterer>, medium: &TwoLayerMedium) -> Result<Self> {
        for (i, s) in scatterers.iter().enumerate() {
            if !(s.position.z > medium.interface_depth) || !s.position.x.is_finite() || !s.position.z.is_finite() {
                return Err(Error::config(format!("scene.scatterers[{i}]"), "position must lie below the interface"));
            }
            if !(s.reflectivity >= 0.0 && s.reflectivity.is_finite()) {
                return Err(Error::config(format!("scene.scatterers[{i}]"), "reflectivity must be nonnegative"));
            }
        }
        Ok(ScattererSet { scatterers })
    }

    pub fn empty() -> Self {
        ScattererSet::default()
    }

    pub fn scatterers(&self) -> &[Scatterer] {
        &self.scatterers
    }

    pub fn len(&self) -> usize {
        self.scatterers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scatterers.is_empty()
    }
}

/// Analysis bins, stored as angular frequencies in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    omegas: Vec<f64>,
    center_hz: f64,
}

impl FrequencyGrid {
    /// FFT-aligned bins `k * bin_width` covering `[center - bw/2, center + bw/2)`.
    pub fn from_band(center_hz: f64, bandwidth_hz: f64, bin_width_hz: f64) -> Result<Self> {
        if !(center_hz > 0.0 && center_hz.is_finite()) {
            return Err(Error::config("frequency.center", "must be positive"));
        }
        if !(bandwidth_hz > 0.0 && bandwidth_hz < 2.0 * center_hz) {
            return Err(Error::config("frequency.bandwidth", "must be positive and below twice the centre"));
        }
        if !(bin_width_hz > 0.0 && bin_width_hz <= bandwidth_hz) {
            return Err(Error::config("frequency.bin_width", "must be positive and at most the bandwidth"));
        }
        let lo = (center_hz - 0.5 * bandwidth_hz) / bin_width_hz;
        let hi = (center_hz + 0.5 * bandwidth_hz) / bin_width_hz;
        let k_lo = (lo - 1e-9).ceil() as u64;
        let k_hi = (hi - 1e-9).ceil() as u64;
        let omegas = (k_lo.max(1)..k_hi).map(|k| 2.0 * std::f64::consts::PI * k as f64 * bin_width_hz).collect::<Vec<_>>();
        if omegas.is_empty() {
            return Err(Error::config("frequency", "band contains no bins"));
        }
        Ok(FrequencyGrid { omegas, center_hz })
    }

    pub fn from_hz(hz: &[f64]) -> Result<Self> {
        if hz.is_empty() || hz.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
            return Err(Error::config("frequency", "bins must be positive"));
        }
        let center_hz = 0.5 * (hz.iter().cloned().fold(f64::INFINITY, f64::min) + hz.iter().cloned().fold(0.0, f64::max));
        Ok(FrequencyGrid { omegas: hz.iter().map(|f| 2.0 * std::f64::consts::PI * f).collect(), center_hz })
    }

    pub fn single(hz: f64) -> Result<Self> {
        FrequencyGrid::from_hz(&[hz])
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn center_hz(&self) -> f64 {
        self.center_hz
    }

    pub fn max_hz(&self) -> f64 {
        self.omegas.iter().cloned().fold(0.0, f64::max) / (2.0 * std::f64::consts::PI)
    }

    /// Bin nearest the centre frequency, lowest index on ties.
    pub fn center_index(&self) -> usize {
        let target = 2.0 * std::f64::consts::PI * self.center_hz;
        let mut best = (f64::INFINITY, 0);
        for (i, w) in self.omegas.iter().enumerate() {
            let d = (w - target).abs();
            if d < best.0 - 1e-9 * target {
                best = (d, i);
            }
        }
        best.1
    }

    pub fn subset(&self, indices: &[usize]) -> FrequencyGrid {
        FrequencyGrid { omegas: indices.iter().map(|&i| self.omegas[i]).collect(), center_hz: self.center_hz }
    }
}

/// Full-matrix-capture data: per bin an M x M matrix whose column p holds
/// the receptions for transmitter p.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyDataset {
    omegas: Vec<f64>,
    data: Vec<DMatrix<C64>>,
    sigma: f64,
}

impl FrequencyDataset {
    pub fn new(omegas: Vec<f64>, data: Vec<DMatrix<C64>>, sigma: f64) -> Result<Self> {
        if omegas.len() != data.len() {
            return Err(Error::Data(format!("{} frequencies but {} data matrices", omegas.len(), data.len())));
        }
        if let Some(first) = data.first() {
            let m = first.nrows();
            for (b, d) in data.iter().enumerate() {
                if d.nrows() != m || d.ncols() != m {
                    return Err(Error::Data(format!("bin {b}: expected {m}x{m} matrix, got {}x{}", d.nrows(), d.ncols())));
                }
            }
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::config("noise.sigma", "must be nonnegative"));
        }
        Ok(FrequencyDataset { omegas, data, sigma })
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn bins(&self) -> usize {
        self.omegas.len()
    }

    pub fn element_count(&self) -> usize {
        self.data.first().map_or(0, |d| d.nrows())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn matrix(&self, bin: usize) -> &DMatrix<C64> {
        &self.data[bin]
    }

    pub fn matrices(&self) -> &[DMatrix<C64>] {
        &self.data
    }

    /// Receptions for one transmitter.
    pub fn snapshot(&self, bin: usize, p: usize) -> DVector<C64> {
        self.data[bin].column(p).into_owned()
    }

    /// `[y_1; y_2; ...; y_M]`, which is the column-major storage order.
    pub fn stacked(&self, bin: usize) -> DVector<C64> {
        DVector::from_column_slice(self.data[bin].as_slice())
    }

    /// Index of the bin closest to `omega`.
    pub fn bin_of(&self, omega: f64) -> Option<usize> {
        self.omegas.iter().enumerate().min_by(|a, b| (a.1 - omega).abs().total_cmp(&(b.1 - omega).abs())).map(|(i, _)| i)
    }

    pub fn scaled(&self, alpha: C64) -> FrequencyDataset {
        FrequencyDataset {
            omegas: self.omegas.clone(),
            data: self.data.iter().map(|d| d * alpha).collect(),
            sigma: self.sigma * alpha.norm(),
        }
    }

    pub fn select_bins(&self, indices: &[usize]) -> FrequencyDataset {
        FrequencyDataset {
            omegas: indices.iter().map(|&i| self.omegas[i]).collect(),
            data: indices.iter().map(|&i| self.data[i].clone()).collect(),
            sigma: self.sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Coefficients {
    Complex(Vec<C64>),
    Real(Vec<f64>),
}

impl Coefficients {
    pub fn len(&self) -> usize {
        match self {
            Coefficients::Complex(v) => v.len(),
            Coefficients::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn modulus(&self, i: usize) -> f64 {
        match self {
            Coefficients::Complex(v) => v[i].norm(),
            Coefficients::Real(v) => v[i].abs(),
        }
    }

    pub fn as_complex(&self) -> Vec<C64> {
        match self {
            Coefficients::Complex(v) => v.clone(),
            Coefficients::Real(v) => v.iter().map(|&x| C64::new(x, 0.0)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverDiagnostics {
    pub method: String,
    pub iterations: usize,
    pub residual_norm: f64,
    pub objective: f64,
    /// (iteration, residual norm, objective) samples.
    pub trace: Vec<(usize, f64, f64)>,
    pub notes: Vec<String>,
}

/// Per-velocity block information for unknown-velocity reconstructions.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityBlocks {
    pub velocities: Vec<f64>,
    pub norms: Vec<f64>,
}

/// Recovered coefficients on an imaging grid. For unknown-velocity runs the
/// vector holds one grid-sized block per trial velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseImage {
    pub n_x: usize,
    pub n_z: usize,
    pub coefficients: Coefficients,
    pub blocks: Option<VelocityBlocks>,
    pub diagnostics: SolverDiagnostics,
}

impl SparseImage {
    pub fn zeros_complex(n_x: usize, n_z: usize) -> Self {
        SparseImage {
            n_x,
            n_z,
            coefficients: Coefficients::Complex(vec![C64::new(0.0, 0.0); n_x * n_z]),
            blocks: None,
            diagnostics: SolverDiagnostics::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Indices whose modulus exceeds `tol`.
    pub fn support(&self, tol: f64) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.coefficients.modulus(i) > tol).collect()
    }

    /// Indices whose modulus exceeds `rel` times the largest modulus.
    pub fn relative_support(&self, rel: f64) -> Vec<usize> {
        let peak = (0..self.len()).map(|i| self.coefficients.modulus(i)).fold(0.0, f64::max);
        if peak == 0.0 {
            return Vec::new();
        }
        self.support(rel * peak)
    }

    pub fn power(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.coefficients.modulus(i).powi(2)).collect()
    }

    /// One velocity block as its own grid-sized image.
    pub fn block(&self, q: usize) -> Result<SparseImage> {
        let n = self.n_x * self.n_z;
        if (q + 1) * n > self.len() {
            return Err(Error::Index { index: q + 1, len: self.len() / n.max(1) });
        }
        let coefficients = match &self.coefficients {
            Coefficients::Complex(v) => Coefficients::Complex(v[q * n..(q + 1) * n].to_vec()),
            Coefficients::Real(v) => Coefficients::Real(v[q * n..(q + 1) * n].to_vec()),
        };
        Ok(SparseImage { n_x: self.n_x, n_z: self.n_z, coefficients, blocks: None, diagnostics: self.diagnostics.clone() })
    }

    /// Block with the largest norm (first on ties); 0 for single-block images.
    pub fn dominant_block(&self) -> usize {
        match &self.blocks {
            Some(b) => b.norms.iter().enumerate().fold(0, |best, (q, v)| if *v > b.norms[best] { q } else { best }),
            None => 0,
        }
    }

    /// |s|^2 of the dominant block, row-major over the grid.
    pub fn block_power(&self) -> Vec<f64> {
        let n = self.n_x * self.n_z;
        let q = self.dominant_block();
        let p = self.power();
        p[q * n..(q + 1) * n].to_vec()
    }

    /// [`Self::block_power`] reshaped to n_z rows by n_x columns.
    pub fn power_image(&self) -> DMatrix<f64> {
        let p = self.block_power();
        DMatrix::from_fn(self.n_z, self.n_x, |i, j| p[i * self.n_x + j])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn medium() -> TwoLayerMedium {
        TwoLayerMedium::new(1482.0, 6400.0, 0.03).unwrap()
    }

    #[test]
    fn pixel_index_mapping_examples() {
        assert_eq!(pixel_index_to_grid(1, 10, 100).unwrap(), (1, 1));
        assert_eq!(pixel_index_to_grid(10, 10, 100).unwrap(), (1, 10));
        assert_eq!(pixel_index_to_grid(11, 10, 100).unwrap(), (2, 1));
        assert!(matches!(pixel_index_to_grid(0, 10, 100), Err(Error::Index { .. })));
        assert!(matches!(pixel_index_to_grid(101, 10, 100), Err(Error::Index { .. })));
    }

    #[test]
    fn grid_mapping_agrees_with_one_based_formulas() {
        let g = ImagingGrid::with_spacing(7, 5, 0.0, 0.04, 1e-3, &medium()).unwrap();
        for l in 0..g.len() {
            let (i, j) = pixel_index_to_grid(l + 1, 7, g.len()).unwrap();
            assert_eq!(g.row_col(l), (i - 1, j - 1));
            assert_eq!(grid_to_pixel_index(i, j, 7, 5).unwrap(), l + 1);
        }
    }

    #[test]
    fn geometry_places_first_element_at_origin() {
        let a = ArrayGeometry::uniform(64, 0.6e-3).unwrap();
        assert_eq!(a.element_x()[0], 0.0);
        assert!((a.aperture() - 63.0 * 0.6e-3).abs() < 1e-15);
        assert!(ArrayGeometry::uniform(64, -1.0).is_err());
        assert!(ArrayGeometry::uniform(1, 1e-3).is_err());
    }

    #[test]
    fn grid_must_sit_below_interface() {
        let err = ImagingGrid::with_spacing(4, 4, 0.0, 0.03, 1e-3, &medium()).unwrap_err();
        assert!(err.to_string().contains("grid.z_min"));
    }

    #[test]
    fn band_has_120_bins_at_41_67_khz() {
        let f = FrequencyGrid::from_band(5e6, 5e6, 100e6 / 2400.0).unwrap();
        assert_eq!(f.len(), 120);
        let hz = f.omegas()[f.center_index()] / (2.0 * std::f64::consts::PI);
        assert!((hz - 5e6).abs() < 1e-3);
        assert!(f.omegas().iter().all(|w| *w / (2.0 * std::f64::consts::PI) >= 2.5e6 - 1e-3));
    }

    #[test]
    fn stacking_is_transmitter_concatenation() {
        let m = DMatrix::from_fn(3, 3, |i, j| C64::new(i as f64, j as f64));
        let d = FrequencyDataset::new(vec![1.0], vec![m.clone()], 0.0).unwrap();
        let y = d.stacked(0);
        for p in 0..3 {
            for i in 0..3 {
                assert_eq!(y[p * 3 + i], m[(i, p)]);
            }
        }
    }
}
