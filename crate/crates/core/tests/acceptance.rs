//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

mod common;

use std::f64::consts::PI;
use std::fs;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{oracle_tables, reference, Reference, REFERENCE_TOML, SIMO_TX};
use lsi_core::analysis::{
    empirical_spark, l1_error_bound_from, nsp_constant_columns, oga_error_bound_mimo, oga_error_bound_simo, ModulusIntegrals,
};
use lsi_core::cli::{cli_run_with, NOISELESS_BETA_REL, SUPPORT_REL};
use lsi_core::dictionary::{DictionaryBuilder, DictionaryCache, RegimePolicy, SensingMatrix};
use lsi_core::imaging::{capon_image, das_image, music_image, sidelobe_floor_db, CaponLoading, DEFAULT_LOADING_DB};
use lsi_core::linalg::least_squares;
use lsi_core::model::{
    ArrayGeometry, Coefficients, FrequencyGrid, ImagingGrid, Scatterer, ScattererSet, SparseImage, TwoLayerMedium, C64,
};
use lsi_core::propagation::{QuadratureSpec, SteeringTables};
use lsi_core::solvers::{
    bpdn_mimo, bpdn_mimo_uv, bpdn_simo, default_beta, l0_oracle, omp_solve, select_velocity, BpdnConfig, OmpConfig,
};
use lsi_core::synthesis::{add_noise, sigma_for_snr, synthesize_fmc, synthesize_fmc_snr};
use lsi_core::testutil::complex_gaussian_matrix;

const FORWARD_REL_TOL: f64 = 1e-3;
const FORWARD_TIME_LIMIT: Duration = Duration::from_secs(60);
const RECOVERY_COEF_TOL: f64 = 1e-3;
const RECOVERY_TIME_LIMIT: Duration = Duration::from_secs(300);
const SNR_DB: f64 = 20.0;
const SIDELOBE_RADIUS: usize = 3;
const SIMO_NOISELESS_FLOOR_DB: f64 = -60.0;
const MIMO_NOISELESS_FLOOR_DB: f64 = -90.0;
const UV_VELOCITIES: [f64; 4] = [5800.0, 6000.0, 6400.0, 6600.0];
const UV_TRIALS: u64 = 100;
const UV_REQUIRED: usize = 95;
const ORACLE_INSTANCES: usize = 200;
const ORACLE_OMP_REQUIRED: usize = 190;
const ORACLE_TIME_LIMIT: Duration = Duration::from_secs(120);
const NOISE_DRAWS: u64 = 10_000;
const NOISE_MEAN_SLACK: f64 = 1.001;
const TAIL_EPS: f64 = 3.0;
const BOUND_TRIALS: u64 = 100;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

fn relaxed<'a>(r: &'a Reference) -> DictionaryBuilder<'a> {
    DictionaryBuilder::new(&r.grid, &r.medium, &r.geometry, &r.quad).policy(RegimePolicy::Relaxed)
}

fn max_rel(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm() / y.norm()).fold(0.0, f64::max)
}

fn forward_model_oracle() -> Outcome {
    let r = reference();
    let pixels = r.grid.pixels();
    let t0 = Instant::now();
    let tables = SteeringTables::build(r.omega, &pixels, &r.medium, &r.geometry, &r.quad, true).unwrap();
    let elapsed = t0.elapsed();
    let (orx, otx) = oracle_tables(
        r.omega,
        &pixels,
        &r.medium,
        r.geometry.element_x(),
        2.0 * r.quad.half_width,
        r.quad.step / 4.0,
        r.quad.taper,
    );
    let tx = tables.tx().unwrap();
    let rx_err = max_rel(tables.rx.as_slice(), orx.as_slice());
    let tx_err = max_rel(tx.as_slice(), otx.as_slice());
    let mut mimo_err = 0.0f64;
    for l in 0..pixels.len() {
        for p in 0..r.geometry.element_count() {
            for m in 0..r.geometry.element_count() {
                let a = tables.rx[(m, l)] * tx[(p, l)];
                let b = orx[(m, l)] * otx[(p, l)];
                mimo_err = mimo_err.max((a - b).norm() / b.norm());
            }
        }
    }
    let worst = rx_err.max(tx_err).max(mimo_err);
    outcome(
        worst <= FORWARD_REL_TOL && elapsed < FORWARD_TIME_LIMIT,
        format!(
            "max relative error rx {rx_err:.2e} tx {tx_err:.2e} pair {mimo_err:.2e} (tol {FORWARD_REL_TOL:.0e}); build {:.1}s (limit {}s)",
            elapsed.as_secs_f64(),
            FORWARD_TIME_LIMIT.as_secs()
        ),
    )
}

fn noiseless_solves(r: &Reference) -> (SparseImage, SparseImage) {
    let ds = synthesize_fmc(&[r.omega], &r.scene, 0.0, 0, &r.medium, &r.geometry, &r.quad).unwrap();
    let b = relaxed(r);
    let y = ds.stacked(0);
    let mimo = bpdn_mimo(&y, &b.phi_mimo(r.omega).unwrap(), &BpdnConfig::with_beta(NOISELESS_BETA_REL * y.norm()).nonnegative())
        .unwrap();
    let y = ds.snapshot(0, SIMO_TX);
    let simo = bpdn_simo(&y, &b.phi_simo(r.omega).unwrap(), &BpdnConfig::with_beta(NOISELESS_BETA_REL * y.norm())).unwrap();
    (mimo, simo)
}

fn exact_recovery() -> Outcome {
    let r = reference();
    let t0 = Instant::now();
    let (mimo, simo) = noiseless_solves(&r);
    let elapsed = t0.elapsed();
    let truth = sorted(r.truth.clone());
    let mimo_support = mimo.relative_support(SUPPORT_REL);
    let simo_support = simo.relative_support(SUPPORT_REL);
    let coef_err = match &mimo.coefficients {
        Coefficients::Real(v) => truth.iter().map(|&l| (v[l] - 1.0).abs()).fold(0.0, f64::max),
        Coefficients::Complex(v) => truth.iter().map(|&l| (v[l] - 1.0).norm()).fold(0.0, f64::max),
    };
    let pass = mimo_support == truth && simo_support == truth && coef_err <= RECOVERY_COEF_TOL && elapsed < RECOVERY_TIME_LIMIT;
    outcome(
        pass,
        format!(
            "truth {truth:?}; mimo {mimo_support:?} coef err {coef_err:.2e} (tol {RECOVERY_COEF_TOL:.0e}); simo tx {} {simo_support:?}; {:.1}s (limit {}s)",
            SIMO_TX + 1,
            elapsed.as_secs_f64(),
            RECOVERY_TIME_LIMIT.as_secs()
        ),
    )
}

fn floor_of(power: &[f64], r: &Reference) -> f64 {
    sidelobe_floor_db(power, &r.grid, &r.truth, SIDELOBE_RADIUS, f64::NEG_INFINITY)
}

fn sidelobe_ordering() -> Outcome {
    let r = reference();
    let freqs = FrequencyGrid::from_band(5e6, 5e6, 100e6 / 2400.0).unwrap();
    let ds = synthesize_fmc_snr(freqs.omegas(), &r.scene, SNR_DB, 7, &r.medium, &r.geometry, &r.quad).unwrap();
    let sigma = ds.sigma();
    let cache = DictionaryCache::new();
    let b = relaxed(&r).cache(&cache);
    let das = floor_of(&das_image(&ds, &b).unwrap().pixels(), &r);
    let music = floor_of(&music_image(&ds, &b, 3).unwrap().pixels(), &r);
    let capon = floor_of(&capon_image(&ds, &b, CaponLoading::AboveNoise { l: 3, db: DEFAULT_LOADING_DB }).unwrap().pixels(), &r);
    let center = ds.select_bins(&[freqs.center_index()]);
    let y = center.snapshot(0, SIMO_TX);
    let simo =
        bpdn_simo(&y, &b.phi_simo(r.omega).unwrap(), &BpdnConfig::with_beta(default_beta(sigma, y.len()).unwrap())).unwrap();
    let y = center.stacked(0);
    let mimo =
        bpdn_mimo(&y, &b.phi_mimo(r.omega).unwrap(), &BpdnConfig::with_beta(default_beta(sigma, y.len()).unwrap()).nonnegative())
            .unwrap();
    let simo = floor_of(&simo.power(), &r);
    let mimo = floor_of(&mimo.power(), &r);
    let (clean_mimo, clean_simo) = noiseless_solves(&r);
    let clean_simo = floor_of(&clean_simo.power(), &r);
    let clean_mimo = floor_of(&clean_mimo.power(), &r);
    let ordered = mimo < simo && simo < capon && capon <= music && music < das;
    let pass = ordered && clean_simo <= SIMO_NOISELESS_FLOOR_DB && clean_mimo <= MIMO_NOISELESS_FLOOR_DB;
    outcome(
        pass,
        format!(
            "{SNR_DB} dB floors: bpdn-mimo {mimo:.1} bpdn-simo {simo:.1} capon {capon:.1} music {music:.1} das {das:.1}; \
             noiseless bpdn-simo {clean_simo:.1} (<= {SIMO_NOISELESS_FLOOR_DB}) bpdn-mimo {clean_mimo:.1} (<= {MIMO_NOISELESS_FLOOR_DB})"
        ),
    )
}

fn velocity_identification() -> Outcome {
    let r = reference();
    let clean = synthesize_fmc(&[r.omega], &r.scene, 0.0, 0, &r.medium, &r.geometry, &r.quad).unwrap();
    let sigma = sigma_for_snr(&clean, SNR_DB).unwrap();
    let psi = relaxed(&r).psi(r.omega, &UV_VELOCITIES).unwrap();
    let beta = default_beta(sigma, psi.rows()).unwrap();
    let mut hits = 0;
    for t in 0..UV_TRIALS {
        let ds = add_noise(&clean, sigma, 1000 + t).unwrap();
        let (_, norms) = bpdn_mimo_uv(&ds.stacked(0), &psi, &BpdnConfig::with_beta(beta).nonnegative()).unwrap();
        if select_velocity(&norms, &UV_VELOCITIES).unwrap().velocity == 6400.0 {
            hits += 1;
        }
    }
    outcome(hits >= UV_REQUIRED, format!("v = 6400 selected in {hits}/{UV_TRIALS} trials (need {UV_REQUIRED})"))
}

fn oracle_equivalence() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut bpdn_agree, mut omp_agree, mut seed) = (0, 0, 0u64);
    for i in 0..ORACLE_INSTANCES {
        let d = loop {
            seed += 1;
            let d = complex_gaussian_matrix(8, 40, seed);
            if empirical_spark(&d, 4).exceeds(4) {
                break d;
            }
        };
        let k = 1 + i % 2;
        let support = sorted(sample(&mut rng, 40, k).into_vec());
        let coefs = lsi_core::testutil::complex_gaussian_vector(k, 10_000 + seed);
        let mut x = vec![C64::new(0.0, 0.0); 40];
        for (j, &l) in support.iter().enumerate() {
            x[l] = coefs[j];
        }
        let y = d.apply(&x);
        let beta = NOISELESS_BETA_REL * y.norm();
        let oracle = l0_oracle(&y, &d, 2, beta).unwrap();
        let omp = omp_solve(&y, &d, &OmpConfig::new(beta, 8)).unwrap();
        let l1 = bpdn_simo(&y, &d, &BpdnConfig::with_beta(beta)).unwrap();
        bpdn_agree += usize::from(l1.relative_support(SUPPORT_REL) == oracle.support);
        omp_agree += usize::from(omp.relative_support(SUPPORT_REL) == oracle.support);
    }
    let elapsed = t0.elapsed();
    outcome(
        bpdn_agree == ORACLE_INSTANCES && omp_agree >= ORACLE_OMP_REQUIRED && elapsed < ORACLE_TIME_LIMIT,
        format!(
            "bpdn agrees {bpdn_agree}/{ORACLE_INSTANCES}, omp {omp_agree}/{ORACLE_INSTANCES} (need {ORACLE_OMP_REQUIRED}); {:.1}s (limit {}s)",
            elapsed.as_secs_f64(),
            ORACLE_TIME_LIMIT.as_secs()
        ),
    )
}

fn concentration() -> Outcome {
    let m = 64;
    let sigma = 1.0;
    let norms: Vec<f64> =
        (0..NOISE_DRAWS).map(|t| lsi_core::synthesis::noise_vector(t, 2.0 * PI * 5e6, 0, m, sigma).norm()).collect();
    let n = norms.len() as f64;
    let mean = norms.iter().sum::<f64>() / n;
    let bound = lsi_core::analysis::noise_norm_bound(m, sigma);
    let exceed = norms.iter().filter(|&&x| (x - mean).abs() >= TAIL_EPS * sigma).count() as f64 / n;
    let q = lsi_core::analysis::concentration_tail(TAIL_EPS);
    let limit = q + 3.0 * (q * (1.0 - q) / n).sqrt();
    outcome(
        mean <= bound * NOISE_MEAN_SLACK && exceed < limit,
        format!("mean norm {mean:.4} vs {bound:.4} x {NOISE_MEAN_SLACK}; tail fraction at eps {TAIL_EPS} {exceed:.2e} (limit {limit:.2e})"),
    )
}

/// Six elements, a 5 x 4 grid at 1 mm and two unit scatterers on grid.
fn bound_validity() -> Outcome {
    let geometry = ArrayGeometry::uniform(6, 0.6e-3).unwrap();
    let medium = TwoLayerMedium::new(1482.0, 6400.0, 0.03).unwrap();
    let omega = 2.0 * PI * 5e6;
    let quad = QuadratureSpec::default_for(&geometry, &medium, 5e6);
    let grid = ImagingGrid::with_spacing(5, 4, -0.5e-3, 35e-3, 1e-3, &medium).unwrap();
    let truth = vec![6usize, 13];
    let k = truth.len();
    let (m, n) = (geometry.element_count(), grid.len());
    let scene =
        ScattererSet::new(truth.iter().map(|&l| Scatterer { position: grid.pixel(l), reflectivity: 1.0 }).collect(), &medium)
            .unwrap();
    let p = 2;
    let b = DictionaryBuilder::new(&grid, &medium, &geometry, &quad).policy(RegimePolicy::Relaxed);
    let phi_s = b.phi_simo(omega).unwrap();
    let phi_m = b.phi_mimo(omega).unwrap();
    let clean = synthesize_fmc(&[omega], &scene, 0.0, 0, &medium, &geometry, &quad).unwrap();
    let sigma = sigma_for_snr(&clean, SNR_DB).unwrap();
    let integrals = ModulusIntegrals::compute(&medium, &geometry, &grid, &quad);
    let oga_s = oga_error_bound_simo(k, sigma, omega, None, &integrals).unwrap().value;
    let oga_m = oga_error_bound_mimo(k, sigma, omega, None, &integrals).unwrap().value;
    let nsp_s = nsp_constant_columns(&phi_s, &truth, k).unwrap();
    let nsp_m = nsp_constant_columns(&phi_m, &truth, k).unwrap();
    let l1_s = l1_error_bound_from(&nsp_s, k, n, m, sigma, 1.0).ok();
    let l1_m = l1_error_bound_from(&nsp_m, k, n, m * m, sigma, 1.0).ok();

    let positions: Vec<_> = truth.iter().map(|&l| grid.pixel(l)).collect();
    let tables = SteeringTables::build(omega, &positions, &medium, &geometry, &quad, true).unwrap();
    let u0_s = DVector::from_iterator(k, (0..k).map(|i| tables.tx().unwrap()[(p, i)]));
    let u0_m = DVector::from_element(k, C64::new(1.0, 0.0));
    let (sub_s, sub_m) = (phi_s.submatrix(&truth), phi_m.submatrix(&truth));
    let full = |support_values: &DVector<C64>| {
        let mut v = vec![C64::new(0.0, 0.0); n];
        for (i, &l) in truth.iter().enumerate() {
            v[l] = support_values[i];
        }
        v
    };
    let (s0_s, s0_m) = (full(&u0_s), full(&u0_m));
    let l1_err = |est: &[C64], s0: &[C64]| {
        let scale = s0.iter().map(|z| z.norm()).fold(0.0, f64::max);
        est.iter().zip(s0).map(|(a, b)| (a - b).norm() / scale).sum::<f64>()
    };
    let (mut ok_oga_s, mut ok_oga_m, mut ok_l1_s, mut ok_l1_m) = (0, 0, 0, 0);
    let (mut worst_oga_s, mut worst_oga_m, mut worst_l1_s, mut worst_l1_m) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for t in 0..BOUND_TRIALS {
        let ds = add_noise(&clean, sigma, 500 + t).unwrap();
        let y_s = ds.snapshot(0, p);
        let y_m = ds.stacked(0);
        let e = (least_squares(&sub_s, &y_s, 1e-12).unwrap() - &u0_s).norm();
        worst_oga_s = worst_oga_s.max(e);
        ok_oga_s += usize::from(e <= oga_s);
        let e = (least_squares(&sub_m, &y_m, 1e-12).unwrap() - &u0_m).norm();
        worst_oga_m = worst_oga_m.max(e);
        ok_oga_m += usize::from(e <= oga_m);
        let est = bpdn_simo(&y_s, &phi_s, &BpdnConfig::with_beta(default_beta(sigma, m).unwrap())).unwrap();
        let e = l1_err(&est.coefficients.as_complex(), &s0_s);
        worst_l1_s = worst_l1_s.max(e);
        ok_l1_s += usize::from(l1_s.is_some_and(|bound| e <= bound));
        let est = bpdn_mimo(&y_m, &phi_m, &BpdnConfig::with_beta(default_beta(sigma, m * m).unwrap()).nonnegative()).unwrap();
        let e = l1_err(&est.coefficients.as_complex(), &s0_m);
        worst_l1_m = worst_l1_m.max(e);
        ok_l1_m += usize::from(l1_m.is_some_and(|bound| e <= bound));
    }
    let show = |b: Option<f64>, rho: f64| b.map_or(format!("inapplicable (rho {rho:.2})"), |v| format!("{v:.3e}"));
    let all = BOUND_TRIALS as usize;
    outcome(
        ok_oga_s == all && ok_oga_m == all && ok_l1_s == all && ok_l1_m == all,
        format!(
            "oga simo {ok_oga_s}/{all} (bound {oga_s:.3e}, worst {worst_oga_s:.3e}); oga mimo {ok_oga_m}/{all} (bound {oga_m:.3e}, worst {worst_oga_m:.3e}); \
             l1 simo {ok_l1_s}/{all} (bound {}, worst {worst_l1_s:.3e}); l1 mimo {ok_l1_m}/{all} (bound {}, worst {worst_l1_m:.3e})",
            show(l1_s, nsp_s.rho),
            show(l1_m, nsp_m.rho)
        ),
    )
}

fn run_pipeline(dir: &std::path::Path) -> Vec<Vec<u8>> {
    let cfg = dir.join("run.toml");
    let text = format!(
        "{REFERENCE_TOML}\n[output]\ndataset = \"{}\"\nimage = \"{}\"\nreport = \"{}\"\n",
        dir.join("data.lscm").display(),
        dir.join("image.csv").display(),
        dir.join("image.txt").display()
    );
    fs::write(&cfg, text).unwrap();
    let cfg = cfg.to_str().unwrap();
    let analysis = dir.join("analysis.txt");
    for args in [
        vec!["simulate", "--config", cfg],
        vec!["image", "--config", cfg],
        vec!["analyze", "--config", cfg, "--out", analysis.to_str().unwrap()],
    ] {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = cli_run_with(std::iter::once("lsi").chain(args.iter().copied()), &mut out, &mut err);
        assert_eq!(code, 0, "{}", String::from_utf8_lossy(&err));
    }
    ["data.lscm", "image.csv", "image.txt", "analysis.txt"].iter().map(|f| fs::read(dir.join(f)).unwrap()).collect()
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run_pipeline(a.path());
    let second = run_pipeline(b.path());
    let same: Vec<bool> = first.iter().zip(&second).map(|(x, y)| x == y).collect();
    outcome(
        same.iter().all(|&s| s),
        format!("identical dataset {} image {} image report {} analysis report {}", same[0], same[1], same[2], same[3]),
    )
}

fn main() {
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: [Criterion; 8] = [
        ("1 forward-model oracle", forward_model_oracle),
        ("2 exact l1 recovery", exact_recovery),
        ("3 sidelobe ordering", sidelobe_ordering),
        ("4 velocity identification", velocity_identification),
        ("5 oracle equivalence", oracle_equivalence),
        ("6 noise concentration", concentration),
        ("7 error-bound validity", bound_validity),
        ("8 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        if filter.as_deref().is_some_and(|f| !name.starts_with(f)) {
            continue;
        }
        let t0 = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let status = if result.pass { "PASS" } else { "FAIL" };
        println!("criterion {name}: {status} [{:.1}s] {}", t0.elapsed().as_secs_f64(), result.detail);
        failed += usize::from(!result.pass);
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion(s) failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
