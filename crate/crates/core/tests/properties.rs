use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use lsi_core::dictionary::SensingMatrix;
use lsi_core::model::{grid_to_pixel_index, pixel_index_to_grid, ArrayGeometry, Coefficients, Point, TwoLayerMedium, C64};
use lsi_core::propagation::{f12, f21, g1, g2, QuadratureSpec, SteeringTables};
use lsi_core::solvers::{bpdn_mimo, bpdn_simo, BpdnConfig};
use lsi_core::testutil::{complex_gaussian_matrix, complex_gaussian_vector};

fn l1(c: &Coefficients) -> f64 {
    (0..c.len()).map(|i| c.modulus(i)).sum()
}

proptest! {
    #[test]
    fn pixel_index_round_trip(n_x in 1usize..50, n_z in 1usize..50, pick in 0.0f64..1.0) {
        let n = n_x * n_z;
        let l = 1 + ((n - 1) as f64 * pick) as usize;
        let (i, j) = pixel_index_to_grid(l, n_x, n).unwrap();
        prop_assert!(i >= 1 && i <= n_z && j >= 1 && j <= n_x);
        prop_assert_eq!(grid_to_pixel_index(i, j, n_x, n_z).unwrap(), l);
        prop_assert!(pixel_index_to_grid(n + 1, n_x, n).is_err());
    }

    #[test]
    fn kernels_scale_with_frequency(x in -0.05f64..0.05, xe in 0.0f64..0.04, dz in 1e-3f64..0.02, w in 1e5f64..1e8, s in 0.1f64..10.0) {
        let (c, v, zh) = (1482.0, 6400.0, 0.03);
        let e = Point::new(xe, 0.0);
        let q = Point::new(x, zh);
        let r = Point::new(xe * 0.5, zh + dz);
        let a = f21(w, e, q, c, zh).unwrap();
        let b = f21(s * w, e, q, c, zh).unwrap();
        prop_assert!((b - a * s).norm() <= 1e-12 * b.norm());
        let a = f12(w, q, r, v, zh).unwrap();
        let b = f12(s * w, q, r, v, zh).unwrap();
        prop_assert!((b - a * s).norm() <= 1e-12 * b.norm());
        let d1 = e.distance(&q);
        prop_assert!((g1(w, e, q, c).unwrap().norm() - d1.powf(-0.5)).abs() <= 1e-12 * d1.powf(-0.5));
        let d2 = q.distance(&r);
        prop_assert!((g2(s * w, q, r, v).unwrap().norm() - d2.powf(-0.5)).abs() <= 1e-12 * d2.powf(-0.5));
    }

    #[test]
    fn bpdn_simo_is_feasible_and_monotone_in_beta(seed in 0u64..500, frac in 0.05f64..0.5) {
        let d = complex_gaussian_matrix(10, 24, seed);
        let mut s0 = DVector::<C64>::zeros(24);
        s0[(seed % 24) as usize] = C64::new(1.0, -0.5);
        let y = &d * &s0 + complex_gaussian_vector(10, seed + 7) * C64::new(0.05, 0.0);
        let beta_lo = frac * y.norm();
        let beta_hi = 1.5 * beta_lo;
        let lo = bpdn_simo(&y, &d, &BpdnConfig::with_beta(beta_lo)).unwrap();
        let hi = bpdn_simo(&y, &d, &BpdnConfig::with_beta(beta_hi)).unwrap();
        let resid = (&y - &d * DVector::from_vec(lo.coefficients.as_complex())).norm();
        prop_assert!(resid <= beta_lo * (1.0 + 1e-6), "residual {} beta {}", resid, beta_lo);
        prop_assert!(l1(&hi.coefficients) <= l1(&lo.coefficients) * (1.0 + 1e-6));
    }

    #[test]
    fn bpdn_mimo_output_is_nonnegative(seed in 0u64..500) {
        let d = complex_gaussian_matrix(16, 12, seed);
        let s0 = DVector::from_fn(12, |i, _| if i % 5 == 0 { C64::new(1.0 + i as f64, 0.0) } else { C64::new(0.0, 0.0) });
        let y = &d * &s0;
        let out = bpdn_mimo(&y, &d, &BpdnConfig::with_beta(1e-3 * y.norm()).nonnegative()).unwrap();
        match &out.coefficients {
            Coefficients::Real(v) => prop_assert!(v.iter().all(|&x| x >= 0.0)),
            Coefficients::Complex(_) => prop_assert!(false, "MIMO output must be real"),
        }
    }
}

fn setup() -> (ArrayGeometry, TwoLayerMedium, QuadratureSpec, Vec<Point>) {
    let geometry = ArrayGeometry::uniform(6, 0.6e-3).unwrap();
    let medium = TwoLayerMedium::new(1482.0, 6400.0, 0.03).unwrap();
    let quad = QuadratureSpec::default_for(&geometry, &medium, 7.5e6);
    let points = (0..7).map(|i| Point::new(-2e-3 + 1e-3 * i as f64, 35e-3 + 0.7e-3 * i as f64)).collect();
    (geometry, medium, quad, points)
}

#[test]
fn permuting_points_permutes_columns() {
    let (geometry, medium, quad, points) = setup();
    let omega = 2.0 * PI * 5e6;
    let perm = [4usize, 0, 6, 2, 5, 1, 3];
    let shuffled: Vec<Point> = perm.iter().map(|&i| points[i]).collect();
    let a = SteeringTables::build(omega, &points, &medium, &geometry, &quad, true).unwrap();
    let b = SteeringTables::build(omega, &shuffled, &medium, &geometry, &quad, true).unwrap();
    for (j, &i) in perm.iter().enumerate() {
        assert_eq!(b.rx.column(j), a.rx.column(i));
        assert_eq!(b.tx().unwrap().column(j), a.tx().unwrap().column(i));
    }
}

#[test]
fn columns_are_nonzero_and_rebuilds_identical() {
    let (geometry, medium, quad, points) = setup();
    for f in [1e6, 5e6, 7.5e6] {
        let omega = 2.0 * PI * f;
        let a = SteeringTables::build(omega, &points, &medium, &geometry, &quad, true).unwrap();
        let b = SteeringTables::build(omega, &points, &medium, &geometry, &quad, true).unwrap();
        assert_eq!(a.rx, b.rx);
        assert_eq!(a.tx, b.tx);
        let d: &DMatrix<C64> = &a.rx;
        for j in 0..d.cols() {
            assert!(d.column(j).norm() > 0.0);
        }
    }
}
