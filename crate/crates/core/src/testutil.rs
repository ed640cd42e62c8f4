//! Seeded random instances for tests and examples.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::model::C64;

/// Matrix with i.i.d. circular complex Gaussian entries of unit variance.
pub fn complex_gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(scale * re, scale * im)
    })
}

pub fn complex_gaussian_vector(len: usize, seed: u64) -> DVector<C64> {
    complex_gaussian_matrix(len, 1, seed).column(0).into_owned()
}
