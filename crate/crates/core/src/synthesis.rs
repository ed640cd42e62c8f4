//! Frequency-domain forward simulator for full-matrix-capture data.
//!
//! Noise is circular complex Gaussian with `E|w|^2 = sigma^2` per entry.
//! Every (frequency, transmitter) pair draws from its own ChaCha stream
//! derived from the run seed, so the output does not depend on evaluation
//! order and a single column can be regenerated in isolation.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{ArrayGeometry, FrequencyDataset, Point, Scatterer, ScattererSet, TwoLayerMedium, C64};
use crate::propagation::{transmit_integral, QuadratureSpec, SteeringTables};

/// `rho * transmit_integral(omega, p, r)`.
pub fn effective_reflectivity(
    omega: f64,
    p: usize,
    scatterer: &Scatterer,
    medium: &TwoLayerMedium,
    geometry: &ArrayGeometry,
    quad: &QuadratureSpec,
) -> Result<C64> {
    if !(scatterer.reflectivity >= 0.0) {
        return Err(Error::config("scene", "reflectivity must be nonnegative"));
    }
    Ok(transmit_integral(omega, p, scatterer.position, medium, geometry, quad)? * scatterer.reflectivity)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Noise vector for one (frequency, transmitter) pair.
pub fn noise_vector(seed: u64, omega: f64, p: usize, len: usize, sigma: f64) -> DVector<C64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(splitmix(omega.to_bits() ^ splitmix(p as u64)));
    let scale = sigma / std::f64::consts::SQRT_2;
    DVector::from_iterator(
        len,
        (0..len).map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            C64::new(scale * re, scale * im)
        }),
    )
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma >= 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::config("noise.sigma", format!("must be nonnegative, got {sigma}")))
    }
}

fn scene_points(scene: &ScattererSet) -> Vec<Point> {
    scene.scatterers().iter().map(|s| s.position).collect()
}

/// Noiseless reception for transmitter `p` from precomputed scatterer tables.
fn clean_column(tables: &SteeringTables, scene: &ScattererSet, p: usize) -> Result<DVector<C64>> {
    let tx = tables.tx()?;
    let mut y = DVector::zeros(tables.rx.nrows());
    for (l, s) in scene.scatterers().iter().enumerate() {
        let coef = tx[(p, l)] * s.reflectivity;
        y.axpy(coef, &tables.rx.column(l), C64::new(1.0, 0.0));
    }
    Ok(y)
}

/// Receptions at every element when element `p` (0-based) fires.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_simo(
    omega: f64,
    p: usize,
    scene: &ScattererSet,
    sigma: f64,
    seed: u64,
    medium: &TwoLayerMedium,
    geometry: &ArrayGeometry,
    quad: &QuadratureSpec,
) -> Result<DVector<C64>> {
    check_sigma(sigma)?;
    if p >= geometry.element_count() {
        return Err(Error::Index { index: p + 1, len: geometry.element_count() });
    }
    let tables = SteeringTables::build(omega, &scene_points(scene), medium, geometry, quad, true)?;
    let mut y = clean_column(&tables, scene, p)?;
    if sigma > 0.0 {
        y += noise_vector(seed, omega, p, geometry.element_count(), sigma);
    }
    Ok(y)
}

/// All transmissions at all frequencies.
pub fn synthesize_fmc(
    omegas: &[f64],
    scene: &ScattererSet,
    sigma: f64,
    seed: u64,
    medium: &TwoLayerMedium,
    geometry: &ArrayGeometry,
    quad: &QuadratureSpec,
) -> Result<FrequencyDataset> {
    check_sigma(sigma)?;
    let m = geometry.element_count();
    let points = scene_points(scene);
    let mut data = Vec::with_capacity(omegas.len());
    for &omega in omegas {
        let tables = SteeringTables::build(omega, &points, medium, geometry, quad, true)?;
        let mut mat = DMatrix::zeros(m, m);
        for p in 0..m {
            let mut y = clean_column(&tables, scene, p)?;
            if sigma > 0.0 {
                y += noise_vector(seed, omega, p, m, sigma);
            }
            mat.set_column(p, &y);
        }
        data.push(mat);
    }
    FrequencyDataset::new(omegas.to_vec(), data, sigma)
}

/// Noise level giving the requested SNR: `sigma^2 = mean|y|^2 / 10^(snr/10)`
/// over every entry of the noiseless dataset.
pub fn sigma_for_snr(clean: &FrequencyDataset, snr_db: f64) -> Result<f64> {
    if !snr_db.is_finite() {
        return Err(Error::config("noise.snr_db", "must be finite"));
    }
    let (sum, count) =
        clean.matrices().iter().fold((0.0, 0usize), |(s, n), d| (s + d.iter().map(|z| z.norm_sqr()).sum::<f64>(), n + d.len()));
    if count == 0 {
        return Ok(0.0);
    }
    Ok((sum / count as f64 / 10f64.powf(snr_db / 10.0)).sqrt())
}

/// Noisy dataset at a prescribed SNR relative to its own noiseless power.
pub fn synthesize_fmc_snr(
    omegas: &[f64],
    scene: &ScattererSet,
    snr_db: f64,
    seed: u64,
    medium: &TwoLayerMedium,
    geometry: &ArrayGeometry,
    quad: &QuadratureSpec,
) -> Result<FrequencyDataset> {
    let clean = synthesize_fmc(omegas, scene, 0.0, seed, medium, geometry, quad)?;
    let sigma = sigma_for_snr(&clean, snr_db)?;
    add_noise(&clean, sigma, seed)
}

/// Adds the seeded noise realisation to a noiseless dataset.
pub fn add_noise(clean: &FrequencyDataset, sigma: f64, seed: u64) -> Result<FrequencyDataset> {
    check_sigma(sigma)?;
    let m = clean.element_count();
    let data = clean
        .matrices()
        .iter()
        .zip(clean.omegas())
        .map(|(d, &omega)| {
            let mut out = d.clone();
            if sigma > 0.0 {
                for p in 0..m {
                    let col = out.column(p) + noise_vector(seed, omega, p, m, sigma);
                    out.set_column(p, &col);
                }
            }
            out
        })
        .collect();
    FrequencyDataset::new(clean.omegas().to_vec(), data, sigma)
}
