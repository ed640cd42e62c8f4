//! Command-line driver: `simulate`, `image`, `analyze`, `oracle`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use crate::analysis::{
    empirical_spark, l1_error_bound_from, noise_norm_bound, nsp_constant_columns, oga_error_bound_mimo, oga_error_bound_simo,
    uniqueness_check, Mode, ModulusIntegrals, Report,
};
use crate::dictionary::{DictionaryBuilder, SensingMatrix};
use crate::error::{Error, Result};
use crate::imaging::{capon_image, das_image, find_peaks, music_image, IntensityImage};
use crate::io::config::{load_config_with, Method, NoiseLevel, RunConfig};
use crate::io::dataset::{read_dataset, write_dataset};
use crate::io::export::{export_image, ImageRef};
use crate::model::{FrequencyDataset, ImagingGrid, SparseImage, C64};
use crate::solvers::{
    bpdn_mimo, bpdn_mimo_uv, bpdn_simo, default_beta, l0_oracle, omp_solve, select_velocity, BpdnConfig, OmpConfig,
};
use crate::synthesis::{synthesize_fmc, synthesize_fmc_snr};

/// Residual bound for noiseless data, relative to the data norm.
pub const NOISELESS_BETA_REL: f64 = 1e-6;
/// Coefficients below this fraction of the peak modulus are not reported.
pub const SUPPORT_REL: f64 = 1e-3;

#[derive(Debug, Parser)]
#[command(name = "lsi", version, about = "Two-layer ultrasonic array simulation and imaging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a frequency-domain dataset.
    Simulate(CommonArgs),
    /// Reconstruct an image from a dataset.
    Image(CommonArgs),
    /// Print uniqueness conditions and error bounds.
    Analyze(CommonArgs),
    /// Compare greedy, l1 and exhaustive l0 recovery on one transmission.
    Oracle(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    method: Option<String>,
    /// Output file (dataset, image or report depending on the subcommand).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    beta: Option<f64>,
    /// 1-based transmitter index.
    #[arg(long)]
    tx: Option<usize>,
    /// `center`, `all` or comma-separated 1-based bin indices.
    #[arg(long)]
    bins: Option<String>,
    /// Input dataset; defaults to `output.dataset`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Config override `section.key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl CommonArgs {
    fn overrides(&self) -> Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        for s in &self.set {
            let (k, v) = s.split_once('=').ok_or_else(|| Error::Usage(format!("--set expects key=value, got {s:?}")))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        if let Some(m) = &self.method {
            let method: Method = m.parse()?;
            out.push(("method.name".into(), format!("{:?}", method.name())));
        }
        if let Some(s) = self.seed {
            out.push(("noise.seed".into(), s.to_string()));
        }
        if let Some(b) = self.beta {
            out.push(("method.beta".into(), format!("{b:e}")));
        }
        if let Some(p) = self.tx {
            out.push(("method.transmitter".into(), p.to_string()));
        }
        if let Some(b) = &self.bins {
            out.push(("method.bins".into(), format!("{b:?}")));
        }
        Ok(out)
    }

    fn load(&self) -> Result<RunConfig> {
        load_config_with(&self.config, &self.overrides()?)
    }
}

/// Runs the CLI with standard streams and returns the process exit code.
pub fn cli_run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    cli_run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`cli_run`] with explicit output streams.
pub fn cli_run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let detail = e.to_string();
            let first = detail.lines().next().unwrap_or("").trim_start_matches("error: ");
            let _ = writeln!(err, "error: usage: {first}");
            return 1;
        }
    };
    match dispatch(&cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {}", e.category(), e);
            e.exit_code()
        }
    }
}

fn dispatch(cmd: &Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Simulate(a) => {
            let cfg = a.load()?;
            let ds = simulate(&cfg)?;
            let path = a.out.clone().unwrap_or_else(|| cfg.output.dataset.clone());
            write_dataset(&path, &ds)?;
            writeln!(
                out,
                "wrote {} ({} bins, {} elements, sigma {:.6e})",
                path.display(),
                ds.bins(),
                ds.element_count(),
                ds.sigma()
            )?;
        }
        Command::Image(a) => {
            let cfg = a.load()?;
            let ds = read_dataset(a.data.as_ref().unwrap_or(&cfg.output.dataset))?;
            let rec = reconstruct(&cfg, &ds)?;
            let path = a.out.clone().unwrap_or_else(|| cfg.output.image.clone());
            let format = crate::io::export::ImageFormat::from_path(&path).unwrap_or(cfg.output.format);
            if let Some(w) = export_image(&path, rec.image.as_ref(), format, cfg.output.db_floor)? {
                writeln!(err, "warning: {w}")?;
            }
            emit_report(&rec.report, cfg.output.report.as_deref(), out)?;
        }
        Command::Analyze(a) => {
            let cfg = a.load()?;
            let report = analyze(&cfg)?;
            emit_report(&report, a.out.as_deref().or(cfg.output.report.as_deref()), out)?;
        }
        Command::Oracle(a) => {
            let cfg = a.load()?;
            let ds = match &a.data {
                Some(p) => read_dataset(p)?,
                None => simulate_bins(&cfg, &[cfg.frequencies.center_index()])?,
            };
            let report = oracle_report(&cfg, &ds)?;
            emit_report(&report, a.out.as_deref().or(cfg.output.report.as_deref()), out)?;
        }
    }
    Ok(())
}

fn emit_report(report: &str, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => fs::write(p, report)?,
        None => out.write_all(report.as_bytes())?,
    }
    Ok(())
}

/// Full-matrix dataset over every configured frequency bin.
pub fn simulate(cfg: &RunConfig) -> Result<FrequencyDataset> {
    simulate_bins(cfg, &(0..cfg.frequencies.len()).collect::<Vec<_>>())
}

fn simulate_bins(cfg: &RunConfig, bins: &[usize]) -> Result<FrequencyDataset> {
    let omegas: Vec<f64> = bins.iter().map(|&k| cfg.frequencies.omegas()[k]).collect();
    match cfg.noise {
        NoiseLevel::Sigma(s) => synthesize_fmc(&omegas, &cfg.scene, s, cfg.seed, &cfg.medium, &cfg.geometry, &cfg.quadrature),
        NoiseLevel::SnrDb(db) => {
            synthesize_fmc_snr(&omegas, &cfg.scene, db, cfg.seed, &cfg.medium, &cfg.geometry, &cfg.quadrature)
        }
    }
}

#[derive(Debug, Clone)]
pub enum ImageResult {
    Intensity(IntensityImage),
    Sparse(SparseImage),
}

impl ImageResult {
    pub fn as_ref(&self) -> ImageRef<'_> {
        match self {
            ImageResult::Intensity(i) => ImageRef::Intensity(i),
            ImageResult::Sparse(s) => ImageRef::Sparse(s),
        }
    }

    /// Per-pixel power, row-major over the grid.
    pub fn power(&self) -> Vec<f64> {
        match self {
            ImageResult::Intensity(i) => i.pixels(),
            ImageResult::Sparse(s) => s.block_power(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub image: ImageResult,
    pub report: String,
}

/// Residual bound used when `method.beta` is unset: the 0.99 noise quantile
/// for noisy data, a small fraction of the data norm otherwise.
pub fn effective_beta(cfg: &RunConfig, y: &DVector<C64>, sigma: f64) -> Result<f64> {
    match cfg.params.beta {
        Some(b) => Ok(b),
        None if sigma > 0.0 => default_beta(sigma, y.len()),
        None => Ok(NOISELESS_BETA_REL * y.norm()),
    }
}

fn one_based(pixels: &[usize]) -> Vec<usize> {
    pixels.iter().map(|l| l + 1).collect()
}

/// Groups pixels into 8-connected clusters, each sorted, in order of their
/// smallest pixel.
pub fn support_clusters(support: &[usize], grid: &ImagingGrid) -> Vec<Vec<usize>> {
    let mut sorted = support.to_vec();
    sorted.sort_unstable();
    let mut label = vec![usize::MAX; sorted.len()];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in 0..sorted.len() {
        if label[i] != usize::MAX {
            continue;
        }
        let id = clusters.len();
        label[i] = id;
        let mut stack = vec![i];
        let mut members = Vec::new();
        while let Some(a) = stack.pop() {
            members.push(sorted[a]);
            for b in 0..sorted.len() {
                if label[b] == usize::MAX && grid.pixel_distance(sorted[a], sorted[b]) <= 1 {
                    label[b] = id;
                    stack.push(b);
                }
            }
        }
        members.sort_unstable();
        clusters.push(members);
    }
    clusters
}

fn builder<'a>(cfg: &'a RunConfig) -> DictionaryBuilder<'a> {
    DictionaryBuilder::new(&cfg.grid, &cfg.medium, &cfg.geometry, &cfg.quadrature).policy(cfg.params.policy)
}

fn dataset_bins(cfg: &RunConfig, ds: &FrequencyDataset) -> Result<Vec<usize>> {
    if ds.element_count() != cfg.geometry.element_count() {
        return Err(Error::Data(format!(
            "dataset has {} elements, config has {}",
            ds.element_count(),
            cfg.geometry.element_count()
        )));
    }
    let wanted = cfg.params.bins_for(cfg.method).resolve(&cfg.frequencies)?;
    wanted
        .iter()
        .map(|&k| {
            let omega = cfg.frequencies.omegas()[k];
            ds.bin_of(omega).ok_or_else(|| Error::Data(format!("dataset has no bin at {:.6e} rad/s", omega)))
        })
        .collect()
}

/// Runs the configured method on a dataset.
pub fn reconstruct(cfg: &RunConfig, ds: &FrequencyDataset) -> Result<Reconstruction> {
    let bins = dataset_bins(cfg, ds)?;
    let b = builder(cfg);
    let mut r = String::new();
    writeln!(r, "method {}", cfg.method.name()).unwrap();
    writeln!(r, "bins {}", bins.len()).unwrap();
    if !cfg.method.is_sparse() {
        let sub = ds.select_bins(&bins);
        let img = match cfg.method {
            Method::Das => das_image(&sub, &b)?,
            Method::Music => music_image(&sub, &b, cfg.params.sources)?,
            Method::Capon => capon_image(&sub, &b, cfg.params.capon)?,
            _ => unreachable!(),
        };
        for (k, v) in &img.parameters {
            writeln!(r, "{k} {v:.6e}").unwrap();
        }
        let power = img.pixels();
        let peak = img.peak();
        for l in find_peaks(&power, &cfg.grid, cfg.params.sources, 2) {
            let (row, col) = cfg.grid.row_col(l);
            let pt = cfg.grid.pixel(l);
            let db = 10.0 * (power[l] / peak).log10();
            writeln!(r, "peak pixel {} row {} col {} x {:.6e} z {:.6e} db {db:.3}", l + 1, row + 1, col + 1, pt.x, pt.z).unwrap();
        }
        return Ok(Reconstruction { image: ImageResult::Intensity(img), report: r });
    }

    if bins.len() != 1 {
        return Err(Error::config("method.bins", format!("{} takes exactly one bin, got {}", cfg.method.name(), bins.len())));
    }
    let bin = bins[0];
    let omega = ds.omegas()[bin];
    let sigma = ds.sigma();
    let p = cfg.params.transmitter;
    writeln!(r, "omega {omega:.6e}").unwrap();
    writeln!(r, "sigma {sigma:.6e}").unwrap();
    let img = match cfg.method {
        Method::Omp | Method::BpdnSimo => {
            writeln!(r, "transmitter {}", p + 1).unwrap();
            let y = ds.snapshot(bin, p);
            let phi = b.phi_simo(omega)?;
            let beta = effective_beta(cfg, &y, sigma)?;
            writeln!(r, "beta {beta:.6e}").unwrap();
            if cfg.method == Method::Omp {
                let ocfg = OmpConfig::new(
                    cfg.params.omp_threshold.unwrap_or(beta),
                    cfg.params.omp_max_atoms.unwrap_or(cfg.geometry.element_count()),
                );
                omp_solve(&y, &phi, &ocfg)?
            } else {
                bpdn_simo(&y, &phi, &BpdnConfig::with_beta(beta))?
            }
        }
        Method::BpdnMimo => {
            let y = ds.stacked(bin);
            let beta = effective_beta(cfg, &y, sigma)?;
            writeln!(r, "beta {beta:.6e}").unwrap();
            bpdn_mimo(&y, &b.phi_mimo(omega)?, &BpdnConfig::with_beta(beta).nonnegative())?
        }
        Method::BpdnMimoUv => {
            let y = ds.stacked(bin);
            let beta = effective_beta(cfg, &y, sigma)?;
            writeln!(r, "beta {beta:.6e}").unwrap();
            let psi = b.psi(omega, &cfg.params.velocities)?;
            let (img, norms) = bpdn_mimo_uv(&y, &psi, &BpdnConfig::with_beta(beta).nonnegative())?;
            for (v, n) in cfg.params.velocities.iter().zip(&norms) {
                writeln!(r, "block velocity {v:.3} norm {n:.6e}").unwrap();
            }
            let sel = select_velocity(&norms, &cfg.params.velocities)?;
            writeln!(r, "selected velocity {:.3}{}", sel.velocity, if sel.ambiguous { " (ambiguous)" } else { "" }).unwrap();
            img
        }
        _ => unreachable!(),
    };
    let d = &img.diagnostics;
    writeln!(r, "iterations {}", d.iterations).unwrap();
    writeln!(r, "residual_norm {:.6e}", d.residual_norm).unwrap();
    writeln!(r, "objective {:.6e}", d.objective).unwrap();
    for note in &d.notes {
        writeln!(r, "note {note}").unwrap();
    }
    let result = ImageResult::Sparse(img);
    let power = result.power();
    let peak = power.iter().cloned().fold(0.0, f64::max);
    let support: Vec<usize> =
        if peak > 0.0 { (0..power.len()).filter(|&l| power[l].sqrt() > SUPPORT_REL * peak.sqrt()).collect() } else { Vec::new() };
    let clusters = support_clusters(&support, &cfg.grid);
    writeln!(r, "support {}", support.len()).unwrap();
    writeln!(r, "clusters {}", clusters.len()).unwrap();
    for l in &support {
        let (row, col) = cfg.grid.row_col(*l);
        let pt = cfg.grid.pixel(*l);
        writeln!(
            r,
            "pixel {} row {} col {} x {:.6e} z {:.6e} modulus {:.6e}",
            l + 1,
            row + 1,
            col + 1,
            pt.x,
            pt.z,
            power[*l].sqrt()
        )
        .unwrap();
    }
    Ok(Reconstruction { image: result, report: r })
}

fn true_support(cfg: &RunConfig) -> Vec<usize> {
    let mut s: Vec<usize> = cfg.scene.scatterers().iter().map(|x| cfg.grid.nearest_pixel(x.position)).collect();
    s.sort_unstable();
    s.dedup();
    s
}

fn config_sigma(cfg: &RunConfig) -> Result<f64> {
    match cfg.noise {
        NoiseLevel::Sigma(s) => Ok(s),
        NoiseLevel::SnrDb(_) => Ok(simulate(cfg)?.sigma()),
    }
}

fn write_report(out: &mut String, title: &str, report: &Report) {
    writeln!(out, "[{title}]").unwrap();
    write!(out, "{report}").unwrap();
}

/// Uniqueness conditions, noise level, greedy and l1 error bounds at the
/// centre frequency.
pub fn analyze(cfg: &RunConfig) -> Result<String> {
    let m = cfg.geometry.element_count();
    let n = cfg.grid.len();
    let k = cfg.params.sources;
    let sigma = config_sigma(cfg)?;
    let omega = cfg.frequencies.omegas()[cfg.frequencies.center_index()];
    let tau = cfg.params.tau;
    let mut out = String::new();
    writeln!(out, "elements {m}").unwrap();
    writeln!(out, "pixels {n}").unwrap();
    writeln!(out, "sparsity {k}").unwrap();
    writeln!(out, "sigma {sigma:.6e}").unwrap();
    writeln!(out, "omega {omega:.6e}").unwrap();
    writeln!(out, "tau {tau:.6e}").unwrap();
    for mode in [Mode::Simo, Mode::Mimo] {
        let title = match mode {
            Mode::Simo => "uniqueness simo",
            Mode::Mimo => "uniqueness mimo",
        };
        write_report(&mut out, title, &uniqueness_check(m, k, n, mode).report());
    }
    writeln!(out, "[noise]").unwrap();
    writeln!(out, "simo sqrt(M) sigma {:.6e}", noise_norm_bound(m, sigma)).unwrap();
    writeln!(out, "mimo M sigma {:.6e}", noise_norm_bound(m * m, sigma)).unwrap();

    let integrals = ModulusIntegrals::compute(&cfg.medium, &cfg.geometry, &cfg.grid, &cfg.quadrature);
    writeln!(out, "[greedy bounds]").unwrap();
    let simo = oga_error_bound_simo(k, sigma, omega, None, &integrals)?;
    writeln!(out, "simo {:.6e} at element {} pixel {}", simo.value, simo.element + 1, simo.pixel + 1).unwrap();
    let mimo = oga_error_bound_mimo(k, sigma, omega, None, &integrals)?;
    writeln!(
        out,
        "mimo {:.6e} at element {} transmitter {} pixel {}",
        mimo.value,
        mimo.element + 1,
        mimo.transmitter.map_or(0, |p| p + 1),
        mimo.pixel + 1
    )
    .unwrap();

    writeln!(out, "[l1 bounds]").unwrap();
    let support = true_support(cfg);
    if support.is_empty() {
        writeln!(out, "skipped: scene has no scatterers").unwrap();
    } else {
        let b = builder(cfg).policy(crate::dictionary::RegimePolicy::Relaxed);
        let simo = b.phi_simo(omega)?;
        l1_lines(&mut out, "simo", &simo, &support, k, n, m, sigma, tau)?;
        let mimo = b.phi_mimo(omega)?;
        l1_lines(&mut out, "mimo", &mimo, &support, k, n, m * m, sigma, tau)?;
    }

    writeln!(out, "[spark simo]").unwrap();
    let phi = builder(cfg).policy(crate::dictionary::RegimePolicy::Relaxed).phi_simo(omega)?;
    let spark = empirical_spark(&phi, 2 * k + 1);
    writeln!(out, "spark {spark}").unwrap();
    writeln!(out, "spark > 2L {}", if spark.exceeds(2 * k) { "pass" } else { "unverified" }).unwrap();
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn l1_lines<D: SensingMatrix + ?Sized>(
    out: &mut String,
    label: &str,
    d: &D,
    support: &[usize],
    k: usize,
    n: usize,
    m_eff: usize,
    sigma: f64,
    tau: f64,
) -> Result<()> {
    let nsp = nsp_constant_columns(d, support, k)?;
    writeln!(out, "{label} rho {:.6e}", nsp.rho).unwrap();
    match l1_error_bound_from(&nsp, k, n, m_eff, sigma, tau) {
        Ok(v) => writeln!(out, "{label} bound {v:.6e}").unwrap(),
        Err(Error::BoundInapplicable { rho }) => writeln!(out, "{label} bound inapplicable (rho {rho:.6e} >= 1)").unwrap(),
        Err(e) => return Err(e),
    }
    Ok(())
}

/// OMP, complex BPDN and the exhaustive l0 search on one transmission at
/// the centre bin.
pub fn oracle_report(cfg: &RunConfig, ds: &FrequencyDataset) -> Result<String> {
    let omega = cfg.frequencies.omegas()[cfg.frequencies.center_index()];
    let bin = ds.bin_of(omega).ok_or_else(|| Error::Data("dataset has no centre-frequency bin".into()))?;
    let p = cfg.params.transmitter;
    if p >= ds.element_count() {
        return Err(Error::Index { index: p + 1, len: ds.element_count() });
    }
    let y = ds.snapshot(bin, p);
    let phi = builder(cfg).phi_simo(omega)?;
    let beta = effective_beta(cfg, &y, ds.sigma())?;
    let k = cfg.params.sources;
    let oracle = l0_oracle(&y, &phi, k, beta)?;
    let omp =
        omp_solve(&y, &phi, &OmpConfig::new(cfg.params.omp_threshold.unwrap_or(beta), cfg.params.omp_max_atoms.unwrap_or(k)))?;
    let l1 = bpdn_simo(&y, &phi, &BpdnConfig::with_beta(beta))?;
    let omp_support = omp.relative_support(SUPPORT_REL);
    let l1_support = l1.relative_support(SUPPORT_REL);
    let mut out = String::new();
    writeln!(out, "omega {omega:.6e}").unwrap();
    writeln!(out, "transmitter {}", p + 1).unwrap();
    writeln!(out, "beta {beta:.6e}").unwrap();
    writeln!(
        out,
        "l0 support {:?} residual {:.6e} subsets {}",
        one_based(&oracle.support),
        oracle.residual_norm,
        oracle.subsets_tried
    )
    .unwrap();
    writeln!(out, "omp support {:?} agree {}", one_based(&omp_support), omp_support == oracle.support).unwrap();
    writeln!(out, "bpdn support {:?} agree {}", one_based(&l1_support), l1_support == oracle.support).unwrap();
    Ok(out)
}
