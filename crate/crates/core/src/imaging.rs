//! Delay-and-sum, MUSIC and Capon images over all frequency bins.

use nalgebra::{DMatrix, DVector};

use crate::dictionary::DictionaryBuilder;
use crate::error::{Error, Result};
use crate::linalg::hermitian_eigen_desc;
use crate::model::{FrequencyDataset, ImagingGrid, C64};

/// Nonnegative image on the grid, `n_z` rows by `n_x` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityImage {
    pub values: DMatrix<f64>,
    pub method: String,
    pub parameters: Vec<(String, f64)>,
}

impl IntensityImage {
    pub fn from_pixels(grid: &ImagingGrid, pixels: &[f64], method: &str) -> Self {
        IntensityImage {
            values: DMatrix::from_fn(grid.n_z(), grid.n_x(), |i, j| pixels[grid.index_of(i, j)]),
            method: method.to_string(),
            parameters: Vec::new(),
        }
    }

    /// Values in pixel order (row by row).
    pub fn pixels(&self) -> Vec<f64> {
        let (n_z, n_x) = self.values.shape();
        (0..n_z * n_x).map(|l| self.values[(l / n_x, l % n_x)]).collect()
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// `10 log10(I / max I)`; zero pixels map to negative infinity.
    pub fn db(&self) -> DMatrix<f64> {
        to_db(&self.values)
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.pixels())
    }
}

pub fn to_db(values: &DMatrix<f64>) -> DMatrix<f64> {
    let peak = values.iter().cloned().fold(0.0, f64::max);
    values.map(|v| if peak > 0.0 { 10.0 * (v / peak).log10() } else { f64::NEG_INFINITY })
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn check_dataset(dataset: &FrequencyDataset, builder: &DictionaryBuilder) -> Result<()> {
    if dataset.bins() == 0 {
        return Err(Error::Data("dataset has no frequency bins".into()));
    }
    if dataset.element_count() != builder.geometry.element_count() {
        return Err(Error::Data(format!(
            "dataset has {} elements, array has {}",
            dataset.element_count(),
            builder.geometry.element_count()
        )));
    }
    Ok(())
}

/// `|sum_w sum_p a^H y_p|^2` with receive-only steering.
pub fn das_image(dataset: &FrequencyDataset, builder: &DictionaryBuilder) -> Result<IntensityImage> {
    check_dataset(dataset, builder)?;
    let n = builder.grid.len();
    let mut acc = DVector::<C64>::zeros(n);
    for (b, &omega) in dataset.omegas().iter().enumerate() {
        let y = dataset.matrix(b);
        let summed = y.column_sum();
        let a = builder.receive_tables(omega)?;
        acc += a.rx.ad_mul(&summed);
    }
    let pixels: Vec<f64> = acc.iter().map(|z| z.norm_sqr()).collect();
    Ok(IntensityImage::from_pixels(builder.grid, &pixels, "das"))
}

/// `(1/M) sum_p y_p y_p^H`, symmetrised.
pub fn sample_covariance(dataset: &FrequencyDataset, bin: usize) -> Result<DMatrix<C64>> {
    if bin >= dataset.bins() {
        return Err(Error::Index { index: bin + 1, len: dataset.bins() });
    }
    let y = dataset.matrix(bin);
    if y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Data(format!("bin {bin} has missing snapshots")));
    }
    let m = y.ncols() as f64;
    let r = y * y.adjoint() / C64::new(m, 0.0);
    Ok((&r + r.adjoint()) * C64::new(0.5, 0.0))
}

/// Average of the trailing eigenvalues with the `M - L - 1` divisor.
pub fn noise_power_estimate(r: &DMatrix<C64>, l: usize) -> Result<f64> {
    let m = r.nrows();
    if l + 1 >= m {
        return Err(Error::Parameter(format!("signal dimension {l} leaves no noise subspace for M = {m}")));
    }
    let (values, _) = hermitian_eigen_desc(r)?;
    let sum: f64 = values[l..].iter().sum();
    Ok((sum / (m - l - 1) as f64).max(0.0))
}

/// Relative floor added to the MUSIC denominator.
pub const MUSIC_FLOOR: f64 = 1e-12;

/// MUSIC pseudo-spectrum summed over bins.
pub fn music_image(dataset: &FrequencyDataset, builder: &DictionaryBuilder, l: usize) -> Result<IntensityImage> {
    check_dataset(dataset, builder)?;
    let m = dataset.element_count();
    if l == 0 || l >= m {
        return Err(Error::Parameter(format!("signal dimension must lie in 1..{m}, got {l}")));
    }
    let n = builder.grid.len();
    let mut acc = vec![0.0; n];
    for (b, &omega) in dataset.omegas().iter().enumerate() {
        let r = sample_covariance(dataset, b)?;
        let (_, vecs) = hermitian_eigen_desc(&r)?;
        let noise = vecs.columns(l, m - l);
        let a = builder.receive_tables(omega)?;
        let proj = noise.ad_mul(&a.rx);
        for (j, out) in acc.iter_mut().enumerate() {
            let aa = a.rx.column(j).norm_squared();
            let den = proj.column(j).norm_squared() + MUSIC_FLOOR * aa;
            if den > 0.0 {
                *out += aa / den;
            }
        }
    }
    let mut img = IntensityImage::from_pixels(builder.grid, &acc, "music");
    img.parameters.push(("L".into(), l as f64));
    Ok(img)
}

/// How the Capon diagonal loading is chosen per bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CaponLoading {
    Fixed(f64),
    /// `noise_power_estimate(R, l)` raised by `db` decibels.
    AboveNoise {
        l: usize,
        db: f64,
    },
}

pub const DEFAULT_LOADING_DB: f64 = 11.0;

/// Loading used at one bin. The noise rule is kept strictly positive by a
/// floor of `1e-12 * lambda_max(R)` so exact-rank data stays solvable.
pub fn capon_loading(r: &DMatrix<C64>, loading: CaponLoading) -> Result<f64> {
    let kappa = match loading {
        CaponLoading::Fixed(k) => k,
        CaponLoading::AboveNoise { l, db } => {
            let est = noise_power_estimate(r, l)?;
            let (values, _) = hermitian_eigen_desc(r)?;
            (est * 10f64.powf(db / 10.0)).max(1e-12 * values[0])
        }
    };
    if kappa > 0.0 && kappa.is_finite() {
        Ok(kappa)
    } else {
        Err(Error::Parameter(format!("diagonal loading must be positive, got {kappa}")))
    }
}

/// Diagonally loaded Capon spectrum `a^H a / (a^H (R + kI)^-1 a)` summed
/// over bins.
pub fn capon_image(dataset: &FrequencyDataset, builder: &DictionaryBuilder, loading: CaponLoading) -> Result<IntensityImage> {
    check_dataset(dataset, builder)?;
    let m = dataset.element_count();
    let n = builder.grid.len();
    let mut acc = vec![0.0; n];
    let mut kappas = Vec::with_capacity(dataset.bins());
    for (b, &omega) in dataset.omegas().iter().enumerate() {
        let r = sample_covariance(dataset, b)?;
        let kappa = capon_loading(&r, loading)?;
        kappas.push(kappa);
        let loaded = &r + DMatrix::<C64>::identity(m, m) * C64::new(kappa, 0.0);
        let chol =
            loaded.cholesky().ok_or_else(|| Error::Numeric(format!("loaded covariance at bin {b} is not positive definite")))?;
        let a = builder.receive_tables(omega)?;
        let mut w = a.rx.clone();
        chol.l_dirty().solve_lower_triangular_mut(&mut w);
        for (j, out) in acc.iter_mut().enumerate() {
            let aa = a.rx.column(j).norm_squared();
            let den = w.column(j).norm_squared();
            if den > 0.0 {
                *out += aa / den;
            }
        }
    }
    let mut img = IntensityImage::from_pixels(builder.grid, &acc, "capon");
    let mean_kappa = kappas.iter().sum::<f64>() / kappas.len() as f64;
    img.parameters.push(("kappa_mean".into(), mean_kappa));
    Ok(img)
}

/// Largest dB value outside Chebyshev neighbourhoods of radius `radius`
/// around `exclude`, with everything clipped below at `floor_db`.
pub fn sidelobe_floor_db(power: &[f64], grid: &ImagingGrid, exclude: &[usize], radius: usize, floor_db: f64) -> f64 {
    let peak = power.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return floor_db;
    }
    let mut worst = floor_db;
    for (l, &v) in power.iter().enumerate() {
        if exclude.iter().any(|&t| grid.pixel_distance(l, t) <= radius) {
            continue;
        }
        let db = if v > 0.0 { 10.0 * (v / peak).log10() } else { f64::NEG_INFINITY };
        worst = worst.max(db);
    }
    worst
}

/// Up to `count` strict local maxima (8-neighbourhood), strongest first,
/// at least `min_separation` pixels apart.
pub fn find_peaks(power: &[f64], grid: &ImagingGrid, count: usize, min_separation: usize) -> Vec<usize> {
    let mut candidates: Vec<usize> = (0..power.len())
        .filter(|&l| {
            let (r, c) = grid.row_col(l);
            let mut is_max = power[l] > 0.0;
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                    if (dr, dc) == (0, 0) || rr < 0 || cc < 0 || rr >= grid.n_z() as i64 || cc >= grid.n_x() as i64 {
                        continue;
                    }
                    let k = grid.index_of(rr as usize, cc as usize);
                    if power[k] > power[l] || (power[k] == power[l] && k < l) {
                        is_max = false;
                    }
                }
            }
            is_max
        })
        .collect();
    candidates.sort_by(|&a, &b| power[b].total_cmp(&power[a]).then(a.cmp(&b)));
    let mut peaks: Vec<usize> = Vec::new();
    for c in candidates {
        if peaks.len() == count {
            break;
        }
        if peaks.iter().all(|&p| grid.pixel_distance(p, c) >= min_separation) {
            peaks.push(c);
        }
    }
    peaks
}
