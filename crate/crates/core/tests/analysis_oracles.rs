use std::sync::OnceLock;

use nalgebra::DMatrix;
use proptest::prelude::*;

use lsi_core::analysis::{
    empirical_spark, l1_error_bound_from, noise_norm_bound, nsp_constant, nsp_constant_columns, oga_error_bound_mimo,
    oga_error_bound_simo, uniqueness_check, Mode, ModulusIntegrals, NspConstant, Spark,
};
use lsi_core::model::{ArrayGeometry, ImagingGrid, TwoLayerMedium, C64};
use lsi_core::propagation::QuadratureSpec;
use lsi_core::testutil::complex_gaussian_matrix;

/// Brute-force spark: smallest subset whose columns have numerical rank below
/// the subset size, checked by SVD with the same relative tolerance.
fn brute_spark(a: &DMatrix<C64>) -> usize {
    fn dependent(a: &DMatrix<C64>, idx: &mut Vec<usize>, from: usize, size: usize, tol: f64) -> bool {
        if idx.len() == size {
            if size > a.nrows() {
                return true;
            }
            let sub = DMatrix::from_fn(a.nrows(), size, |i, j| a[(i, idx[j])]);
            return sub.svd(false, false).singular_values.min() <= tol;
        }
        for j in from..a.ncols() {
            idx.push(j);
            let hit = dependent(a, idx, j + 1, size, tol);
            idx.pop();
            if hit {
                return true;
            }
        }
        false
    }
    let tol = 1e-10 * a.clone().svd(false, false).singular_values.max();
    (1..=a.ncols()).find(|&size| dependent(a, &mut Vec::new(), 0, size, tol)).unwrap_or(a.ncols() + 1)
}

#[test]
fn spark_matches_brute_force_on_generic_matrix() {
    let a = complex_gaussian_matrix(6, 20, 5);
    assert_eq!(brute_spark(&a), 7);
    assert_eq!(empirical_spark(&a, 7), Spark::Exact(7));
}

#[test]
fn spark_finds_planted_dependency() {
    let mut a = complex_gaussian_matrix(6, 20, 9);
    let combo = a.column(2) * C64::new(0.5, -1.0) + a.column(11) * C64::new(2.0, 0.25) - a.column(17);
    a.set_column(4, &combo);
    assert_eq!(brute_spark(&a), 4);
    assert_eq!(empirical_spark(&a, 7), Spark::Exact(4));
}

#[test]
fn spark_with_repeated_column_is_two() {
    let mut a = complex_gaussian_matrix(6, 20, 3);
    let col = a.column(0) * C64::new(0.0, 3.0);
    a.set_column(19, &col);
    assert_eq!(empirical_spark(&a, 7), Spark::Exact(2));
}

#[test]
fn nsp_from_columns_matches_partition() {
    let a = complex_gaussian_matrix(10, 30, 17);
    let support = [3usize, 12, 25];
    let s = DMatrix::from_fn(10, 3, |i, j| a[(i, support[j])]);
    let rest: Vec<usize> = (0..30).filter(|j| !support.contains(j)).collect();
    let ns = DMatrix::from_fn(10, rest.len(), |i, j| a[(i, rest[j])]);
    let direct = nsp_constant(&s, &ns, 3).unwrap();
    let cols = nsp_constant_columns(&a, &support, 3).unwrap();
    assert!((direct.rho - cols.rho).abs() <= 1e-12 * direct.rho);
    assert!((direct.support_norm - cols.support_norm).abs() <= 1e-12 * direct.support_norm);
    assert!(nsp_constant_columns(&a, &[30], 1).is_err());
}

#[test]
fn uniqueness_examples() {
    let simo = uniqueness_check(64, 3, 1600, Mode::Simo);
    assert!(simo.report().all_passed());
    let tiny = uniqueness_check(4, 3, 1600, Mode::Simo);
    assert!(!tiny.report().all_passed());
}

proptest! {
    #[test]
    fn spark_is_at_most_rows_plus_one(rows in 2usize..5, extra in 1usize..4, seed in 0u64..1000) {
        let a = complex_gaussian_matrix(rows, rows + extra, seed);
        match empirical_spark(&a, rows + 1) {
            Spark::Exact(s) => prop_assert!(s >= 1 && s <= rows + 1),
            Spark::GreaterThan(_) => prop_assert!(false, "enumeration must finish"),
        }
    }

    #[test]
    fn noise_bound_is_monotone(m in 1usize..5000, s1 in 0.0f64..10.0, ds in 0.0f64..10.0) {
        prop_assert!(noise_norm_bound(m, s1) <= noise_norm_bound(m, s1 + ds));
        prop_assert!(noise_norm_bound(m, s1) <= noise_norm_bound(m + 1, s1));
    }

    #[test]
    fn l1_bound_grows_with_sigma(s in 1.0f64..10.0, frac in 0.0f64..0.99, s1 in 0.0f64..1.0, ds in 0.0f64..1.0) {
        let nsp = NspConstant { rho: frac, support_norm: s, off_support_norm: frac * s };
        let lo = l1_error_bound_from(&nsp, 1, 40, 64, s1, 1.0).unwrap();
        let hi = l1_error_bound_from(&nsp, 1, 40, 64, s1 + ds, 1.0).unwrap();
        prop_assert!(lo >= 0.0 && lo <= hi);
    }

    // Growth in k holds once sqrt(k) T / S >= sqrt(2) - 1.
    #[test]
    fn l1_bound_grows_with_k(s in 1.0f64..10.0, ratio in 0.415f64..0.7, sigma in 0.0f64..1.0) {
        let t = ratio * s;
        let at = |k: usize| {
            let nsp = NspConstant { rho: (k as f64).sqrt() * t / s, support_norm: s, off_support_norm: t };
            l1_error_bound_from(&nsp, k, 40, 64, sigma, 1.0).unwrap()
        };
        prop_assert!(at(1) <= at(2));
    }

    #[test]
    fn oga_bounds_grow_with_sigma_and_k(k in 1usize..6, s1 in 0.0f64..1.0, ds in 0.0f64..1.0) {
        let (ints, omega) = small_integrals();
        let simo = |k, s| oga_error_bound_simo(k, s, omega, None, ints).unwrap().value;
        let mimo = |k, s| oga_error_bound_mimo(k, s, omega, None, ints).unwrap().value;
        prop_assert!(simo(k, s1) >= 0.0 && simo(k, s1) <= simo(k, s1 + ds) && simo(k, s1) <= simo(k + 1, s1));
        prop_assert!(mimo(k, s1) >= 0.0 && mimo(k, s1) <= mimo(k, s1 + ds) && mimo(k, s1) <= mimo(k + 1, s1));
    }
}

fn small_integrals() -> (&'static ModulusIntegrals, f64) {
    static CELL: OnceLock<ModulusIntegrals> = OnceLock::new();
    let ints = CELL.get_or_init(|| {
        let geometry = ArrayGeometry::uniform(6, 0.6e-3).unwrap();
        let medium = TwoLayerMedium::new(1482.0, 6400.0, 0.03).unwrap();
        let grid = ImagingGrid::with_spacing(5, 4, -0.5e-3, 35e-3, 1e-3, &medium).unwrap();
        let quad = QuadratureSpec::default_for(&geometry, &medium, 7.5e6);
        ModulusIntegrals::compute(&medium, &geometry, &grid, &quad)
    });
    (ints, 2.0 * std::f64::consts::PI * 5e6)
}
