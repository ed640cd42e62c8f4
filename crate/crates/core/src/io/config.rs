//! TOML run configuration.
//!
//! ```toml
//! [array]
//! elements = 64
//! pitch = 0.6e-3
//!
//! [medium]
//! c = 1482.0
//! v = 6400.0
//! interface_depth = 0.03
//!
//! [grid]
//! nx = 40
//! nz = 40
//! x_min = 9e-3
//! z_min = 35e-3
//! spacing = 0.5e-3
//!
//! [frequency]
//! center = 5e6
//! bandwidth = 5e6
//! sampling = 100e6
//! samples = 2400
//!
//! [scene]
//! scatterers = [[12e-3, 40e-3], [26e-3, 40e-3], [19e-3, 45e-3, 1.0]]
//!
//! [noise]
//! snr_db = 20.0
//! seed = 7
//!
//! [method]
//! name = "bpdn-mimo"
//! policy = "relaxed"
//! ```
//!
//! Lengths are in metres, speeds in m/s, frequencies in Hz. Transmitter and
//! bin indices are 1-based. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use toml::{Table, Value};

use super::export::ImageFormat;
use crate::dictionary::RegimePolicy;
use crate::error::{Error, Result};
use crate::imaging::{CaponLoading, DEFAULT_LOADING_DB};
use crate::model::{ArrayGeometry, FrequencyGrid, ImagingGrid, Point, Scatterer, ScattererSet, TwoLayerMedium};
use crate::propagation::{QuadratureSpec, DEFAULT_TAPER};

/// FFT length giving the default bin width at the configured sampling rate.
pub const DEFAULT_SAMPLES: u64 = 2400;
pub const DEFAULT_DB_FLOOR: f64 = -120.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Das,
    Music,
    Capon,
    Omp,
    BpdnSimo,
    BpdnMimo,
    BpdnMimoUv,
}

impl Method {
    pub const ALL: [Method; 7] =
        [Method::Das, Method::Music, Method::Capon, Method::Omp, Method::BpdnSimo, Method::BpdnMimo, Method::BpdnMimoUv];

    pub fn name(self) -> &'static str {
        match self {
            Method::Das => "das",
            Method::Music => "music",
            Method::Capon => "capon",
            Method::Omp => "omp",
            Method::BpdnSimo => "bpdn-simo",
            Method::BpdnMimo => "bpdn-mimo",
            Method::BpdnMimoUv => "bpdn-mimo-uv",
        }
    }

    pub fn is_sparse(self) -> bool {
        matches!(self, Method::Omp | Method::BpdnSimo | Method::BpdnMimo | Method::BpdnMimoUv)
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
            Error::Usage(format!("unknown method {s:?}, expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseLevel {
    Sigma(f64),
    SnrDb(f64),
}

/// Which frequency bins a method uses (0-based indices into the grid).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BinSelection {
    Center,
    All,
    Indices(Vec<usize>),
}

impl BinSelection {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "center" => Ok(BinSelection::Center),
            "all" => Ok(BinSelection::All),
            list => list
                .split(',')
                .map(|t| match t.trim().parse::<usize>() {
                    Ok(k) if k >= 1 => Ok(k - 1),
                    _ => Err(Error::config("method.bins", format!("expected center, all or 1-based indices, got {t:?}"))),
                })
                .collect::<Result<Vec<_>>>()
                .map(BinSelection::Indices),
        }
    }

    pub fn resolve(&self, grid: &FrequencyGrid) -> Result<Vec<usize>> {
        match self {
            BinSelection::Center => Ok(vec![grid.center_index()]),
            BinSelection::All => Ok((0..grid.len()).collect()),
            BinSelection::Indices(idx) => {
                if let Some(&bad) = idx.iter().find(|&&k| k >= grid.len()) {
                    return Err(Error::Index { index: bad + 1, len: grid.len() });
                }
                Ok(idx.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodParams {
    /// Signal-subspace dimension for MUSIC and sparsity level for analysis.
    pub sources: usize,
    pub capon: CaponLoading,
    pub beta: Option<f64>,
    pub tau: f64,
    /// 0-based.
    pub transmitter: usize,
    pub velocities: Vec<f64>,
    pub omp_threshold: Option<f64>,
    pub omp_max_atoms: Option<usize>,
    /// `None` means all bins for classical imagers and the centre bin for
    /// sparse ones.
    pub bins: Option<BinSelection>,
    pub policy: RegimePolicy,
}

impl MethodParams {
    pub fn bins_for(&self, method: Method) -> BinSelection {
        match &self.bins {
            Some(b) => b.clone(),
            None if method.is_sparse() => BinSelection::Center,
            None => BinSelection::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dataset: PathBuf,
    pub image: PathBuf,
    pub report: Option<PathBuf>,
    pub format: ImageFormat,
    pub db_floor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub geometry: ArrayGeometry,
    pub medium: TwoLayerMedium,
    pub grid: ImagingGrid,
    pub frequencies: FrequencyGrid,
    pub scene: ScattererSet,
    pub noise: NoiseLevel,
    pub seed: u64,
    pub method: Method,
    pub params: MethodParams,
    pub quadrature: QuadratureSpec,
    pub output: OutputConfig,
}

/// Typed access to one table, tracking its dotted path for error messages.
struct Section<'a> {
    path: String,
    table: Option<&'a Table>,
}

impl<'a> Section<'a> {
    fn open(root: &'a Table, name: &str, allowed: &[&str]) -> Result<Self> {
        let table = match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => return Err(Error::config(name, "expected a table")),
        };
        if let Some(t) = table {
            if let Some(k) = t.keys().find(|k| !allowed.contains(&k.as_str())) {
                return Err(Error::config(format!("{name}.{k}"), "unknown key"));
            }
        }
        Ok(Section { path: name.to_string(), table })
    }

    fn key(&self, k: &str) -> String {
        format!("{}.{k}", self.path)
    }

    fn get(&self, k: &str) -> Option<&'a Value> {
        self.table.and_then(|t| t.get(k))
    }

    fn has(&self, k: &str) -> bool {
        self.get(k).is_some()
    }

    fn f64(&self, k: &str) -> Result<Option<f64>> {
        match self.get(k) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(Error::config(self.key(k), "expected a number")),
        }
    }

    fn req_f64(&self, k: &str) -> Result<f64> {
        self.f64(k)?.ok_or_else(|| Error::config(self.key(k), "missing required key"))
    }

    fn u64(&self, k: &str) -> Result<Option<u64>> {
        match self.get(k) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(_) => Err(Error::config(self.key(k), "expected a nonnegative integer")),
        }
    }

    fn usize(&self, k: &str) -> Result<Option<usize>> {
        Ok(self.u64(k)?.map(|v| v as usize))
    }

    fn req_usize(&self, k: &str) -> Result<usize> {
        self.usize(k)?.ok_or_else(|| Error::config(self.key(k), "missing required key"))
    }

    fn str(&self, k: &str) -> Result<Option<&'a str>> {
        match self.get(k) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(_) => Err(Error::config(self.key(k), "expected a string")),
        }
    }

    fn f64_list(&self, k: &str) -> Result<Option<Vec<f64>>> {
        match self.get(k) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    Value::Float(x) => Ok(*x),
                    Value::Integer(i) => Ok(*i as f64),
                    _ => Err(Error::config(self.key(k), "expected an array of numbers")),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(_) => Err(Error::config(self.key(k), "expected an array of numbers")),
        }
    }

    fn exclusive(&self, a: &str, b: &str) -> Result<()> {
        if self.has(a) && self.has(b) {
            return Err(Error::config(self.key(b), format!("conflicts with {}", self.key(a))));
        }
        Ok(())
    }
}

const SECTIONS: [&str; 9] = ["array", "medium", "grid", "frequency", "scene", "noise", "method", "quadrature", "output"];

fn parse_table(text: &str) -> Result<Table> {
    text.parse::<Table>().map_err(|e| {
        let line = e.span().map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        Error::Parse { line, detail: e.message().to_string() }
    })
}

/// Applies `section.key=value` overrides. Values are read as TOML literals,
/// falling back to plain strings.
pub fn apply_overrides(root: &mut Table, overrides: &[(String, String)]) -> Result<()> {
    for (key, raw) in overrides {
        let (section, field) = key
            .split_once('.')
            .filter(|(s, f)| !s.is_empty() && !f.is_empty() && !f.contains('.'))
            .ok_or_else(|| Error::Usage(format!("override key {key:?} must look like section.key")))?;
        let value = match format!("v = {raw}").parse::<Table>() {
            Ok(mut t) => t.remove("v").unwrap(),
            Err(_) => Value::String(raw.clone()),
        };
        let entry = root.entry(section.to_string()).or_insert_with(|| Value::Table(Table::new()));
        match entry {
            Value::Table(t) => {
                t.insert(field.to_string(), value);
            }
            _ => return Err(Error::config(section, "expected a table")),
        }
    }
    Ok(())
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with(text, &[])
}

pub fn parse_config_with(text: &str, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut root = parse_table(text)?;
    apply_overrides(&mut root, overrides)?;
    from_table(&root)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    load_config_with(path, &[])
}

pub fn load_config_with(path: impl AsRef<Path>, overrides: &[(String, String)]) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
    parse_config_with(&text, overrides)
}

fn from_table(root: &Table) -> Result<RunConfig> {
    if let Some(k) = root.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
        return Err(Error::config(k.as_str(), "unknown section"));
    }

    let array = Section::open(root, "array", &["elements", "pitch"])?;
    let geometry = ArrayGeometry::uniform(array.req_usize("elements")?, array.req_f64("pitch")?)?;

    let med = Section::open(root, "medium", &["c", "v", "interface_depth"])?;
    let medium = TwoLayerMedium::new(med.req_f64("c")?, med.req_f64("v")?, med.req_f64("interface_depth")?)?;

    let g = Section::open(root, "grid", &["nx", "nz", "x_min", "z_min", "spacing", "x_max", "z_max"])?;
    let (nx, nz) = (g.req_usize("nx")?, g.req_usize("nz")?);
    let (x_min, z_min) = (g.req_f64("x_min")?, g.req_f64("z_min")?);
    g.exclusive("spacing", "x_max")?;
    let grid = match g.f64("spacing")? {
        Some(h) => ImagingGrid::with_spacing(nx, nz, x_min, z_min, h, &medium)?,
        None => ImagingGrid::new(nx, nz, x_min, g.req_f64("x_max")?, z_min, g.req_f64("z_max")?, &medium)?,
    };

    let f = Section::open(root, "frequency", &["center", "bandwidth", "sampling", "samples", "bin_width"])?;
    f.exclusive("sampling", "bin_width")?;
    let bin_width = match f.f64("bin_width")? {
        Some(w) => w,
        None => {
            let fs = f.req_f64("sampling")?;
            if !(fs > 0.0) {
                return Err(Error::config("frequency.sampling", format!("must be positive, got {fs}")));
            }
            let n = f.u64("samples")?.unwrap_or(DEFAULT_SAMPLES);
            if n == 0 {
                return Err(Error::config("frequency.samples", "must be positive"));
            }
            fs / n as f64
        }
    };
    let center = f.req_f64("center")?;
    let frequencies = FrequencyGrid::from_band(center, f.req_f64("bandwidth")?, bin_width)?;
    if let Some(fs) = f.f64("sampling")? {
        if frequencies.max_hz() >= 0.5 * fs {
            return Err(Error::config("frequency.sampling", "band reaches the Nyquist frequency"));
        }
    }

    let sc = Section::open(root, "scene", &["scatterers"])?;
    let scene = match sc.get("scatterers") {
        None => ScattererSet::empty(),
        Some(Value::Array(items)) => {
            let mut out = Vec::with_capacity(items.len());
            for (i, item) in items.iter().enumerate() {
                let key = format!("scene.scatterers[{i}]");
                let nums = match item {
                    Value::Array(a) => {
                        a.iter().map(|v| v.as_float().or_else(|| v.as_integer().map(|i| i as f64))).collect::<Option<Vec<f64>>>()
                    }
                    _ => None,
                }
                .filter(|v| v.len() == 2 || v.len() == 3)
                .ok_or_else(|| Error::config(key.as_str(), "expected [x, z] or [x, z, reflectivity]"))?;
                out.push(Scatterer { position: Point::new(nums[0], nums[1]), reflectivity: nums.get(2).copied().unwrap_or(1.0) });
            }
            ScattererSet::new(out, &medium)?
        }
        Some(_) => return Err(Error::config("scene.scatterers", "expected an array")),
    };

    let nz_ = Section::open(root, "noise", &["sigma", "snr_db", "seed"])?;
    nz_.exclusive("sigma", "snr_db")?;
    let noise = match (nz_.f64("sigma")?, nz_.f64("snr_db")?) {
        (_, Some(snr)) if !snr.is_finite() => return Err(Error::config("noise.snr_db", "must be finite")),
        (_, Some(snr)) => NoiseLevel::SnrDb(snr),
        (Some(s), None) if !(s >= 0.0 && s.is_finite()) => {
            return Err(Error::config("noise.sigma", format!("must be nonnegative, got {s}")))
        }
        (s, None) => NoiseLevel::Sigma(s.unwrap_or(0.0)),
    };
    let seed = nz_.u64("seed")?.unwrap_or(0);

    let m = Section::open(
        root,
        "method",
        &[
            "name",
            "sources",
            "capon_kappa",
            "capon_loading_db",
            "beta",
            "tau",
            "transmitter",
            "velocities",
            "omp_threshold",
            "omp_max_atoms",
            "bins",
            "policy",
        ],
    )?;
    let method = match m.str("name")? {
        None => Method::Das,
        Some(s) => s.parse().map_err(|_| Error::config("method.name", format!("unknown method {s:?}")))?,
    };
    let sources = m.usize("sources")?.unwrap_or(scene.len().max(1));
    if sources == 0 {
        return Err(Error::config("method.sources", "must be positive"));
    }
    m.exclusive("capon_kappa", "capon_loading_db")?;
    let capon = match (m.f64("capon_kappa")?, m.f64("capon_loading_db")?) {
        (Some(k), _) if !(k > 0.0 && k.is_finite()) => return Err(Error::config("method.capon_kappa", "must be positive")),
        (Some(k), _) => CaponLoading::Fixed(k),
        (None, db) => CaponLoading::AboveNoise { l: sources, db: db.unwrap_or(DEFAULT_LOADING_DB) },
    };
    let beta = m.f64("beta")?;
    if let Some(b) = beta {
        if !(b >= 0.0 && b.is_finite()) {
            return Err(Error::config("method.beta", format!("must be nonnegative, got {b}")));
        }
    }
    let tau = m.f64("tau")?.unwrap_or(1.0);
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::config("method.tau", format!("must be positive, got {tau}")));
    }
    let transmitter = match m.usize("transmitter")? {
        None => 0,
        Some(p) if p >= 1 && p <= geometry.element_count() => p - 1,
        Some(p) => {
            return Err(Error::config("method.transmitter", format!("must lie in 1..={}, got {p}", geometry.element_count())))
        }
    };
    let velocities = m.f64_list("velocities")?.unwrap_or_else(|| vec![medium.v]);
    if velocities.is_empty() || velocities.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::config("method.velocities", "need positive trial velocities"));
    }
    let omp_threshold = m.f64("omp_threshold")?;
    if let Some(t) = omp_threshold {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::config("method.omp_threshold", "must be nonnegative"));
        }
    }
    let omp_max_atoms = m.usize("omp_max_atoms")?;
    let bins = match m.get("bins") {
        None => None,
        Some(Value::String(s)) => Some(BinSelection::parse(s)?),
        Some(Value::Array(a)) => {
            let idx = a
                .iter()
                .map(|v| match v.as_integer() {
                    Some(k) if k >= 1 => Ok(k as usize - 1),
                    _ => Err(Error::config("method.bins", "indices are 1-based integers")),
                })
                .collect::<Result<Vec<_>>>()?;
            Some(BinSelection::Indices(idx))
        }
        Some(_) => return Err(Error::config("method.bins", "expected a string or an array")),
    };
    if let Some(b) = &bins {
        b.resolve(&frequencies).map_err(|e| Error::config("method.bins", e.to_string()))?;
    }
    let policy = match m.str("policy")? {
        None | Some("strict") => RegimePolicy::Strict,
        Some("relaxed") => RegimePolicy::Relaxed,
        Some(other) => return Err(Error::config("method.policy", format!("expected strict or relaxed, got {other:?}"))),
    };

    let q = Section::open(root, "quadrature", &["half_width", "step", "taper"])?;
    let default = QuadratureSpec::default_for(&geometry, &medium, frequencies.max_hz());
    let quadrature = QuadratureSpec {
        half_width: q.f64("half_width")?.unwrap_or(default.half_width),
        step: q.f64("step")?.unwrap_or(default.step),
        taper: q.f64("taper")?.unwrap_or(DEFAULT_TAPER),
    };
    let omega_max = frequencies.omegas().iter().cloned().fold(0.0, f64::max);
    quadrature.validate(&geometry, &medium, omega_max)?;

    let o = Section::open(root, "output", &["dataset", "image", "report", "format", "db_floor"])?;
    let image = PathBuf::from(o.str("image")?.unwrap_or("image.csv"));
    let format = match o.str("format")? {
        Some(s) => ImageFormat::parse(s)?,
        None => ImageFormat::from_path(&image).unwrap_or(ImageFormat::Csv),
    };
    let db_floor = o.f64("db_floor")?.unwrap_or(DEFAULT_DB_FLOOR);
    if !(db_floor < 0.0) {
        return Err(Error::config("output.db_floor", format!("must be negative, got {db_floor}")));
    }
    let output = OutputConfig {
        dataset: PathBuf::from(o.str("dataset")?.unwrap_or("dataset.lscm")),
        image,
        report: o.str("report")?.map(PathBuf::from),
        format,
        db_floor,
    };

    Ok(RunConfig {
        geometry,
        medium,
        grid,
        frequencies,
        scene,
        noise,
        seed,
        method,
        params: MethodParams { sources, capon, beta, tau, transmitter, velocities, omp_threshold, omp_max_atoms, bins, policy },
        quadrature,
        output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const REFERENCE: &str = r#"
[array]
elements = 64
pitch = 0.6e-3

[medium]
c = 1482.0
v = 6400.0
interface_depth = 0.03

[grid]
nx = 40
nz = 40
x_min = 9e-3
z_min = 35e-3
spacing = 0.5e-3

[frequency]
center = 5e6
bandwidth = 5e6
sampling = 100e6

[scene]
scatterers = [[12e-3, 40e-3], [26e-3, 40e-3], [19e-3, 45e-3]]
"#;

    #[test]
    fn reference_config_loads() {
        let cfg = parse_config(REFERENCE).unwrap();
        assert_eq!(cfg.geometry.element_count(), 64);
        assert_eq!(cfg.frequencies.len(), 120);
        assert_eq!(cfg.grid.len(), 1600);
        assert_eq!(cfg.scene.len(), 3);
        assert_eq!(cfg.params.sources, 3);
        assert_eq!(cfg.method, Method::Das);
        assert_eq!(
            cfg.params.bins_for(Method::BpdnMimo).resolve(&cfg.frequencies).unwrap(),
            vec![cfg.frequencies.center_index()]
        );
    }

    #[test]
    fn missing_key_is_named() {
        let text = REFERENCE.replace("v = 6400.0\n", "");
        match parse_config(&text) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "medium.v"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_values_and_unknown_keys() {
        let text = REFERENCE.replace("pitch = 0.6e-3", "pitch = -1");
        assert!(matches!(parse_config(&text), Err(Error::Config { field, .. }) if field == "array.pitch"));
        let text = REFERENCE.replace("pitch = 0.6e-3", "pitch = 0.6e-3\ncolour = 3");
        assert!(matches!(parse_config(&text), Err(Error::Config { field, .. }) if field == "array.colour"));
        let text = format!("{REFERENCE}\n[extra]\na = 1\n");
        assert!(matches!(parse_config(&text), Err(Error::Config { field, .. }) if field == "extra"));
    }

    #[test]
    fn syntax_error_reports_line() {
        let text = "[array]\nelements = 64\npitch = = 1\n";
        assert!(matches!(parse_config(text), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn overrides_mirror_keys() {
        let ov = vec![
            ("method.name".to_string(), "bpdn-simo".to_string()),
            ("method.transmitter".to_string(), "30".to_string()),
            ("noise.snr_db".to_string(), "20".to_string()),
        ];
        let cfg = parse_config_with(REFERENCE, &ov).unwrap();
        assert_eq!(cfg.method, Method::BpdnSimo);
        assert_eq!(cfg.params.transmitter, 29);
        assert_eq!(cfg.noise, NoiseLevel::SnrDb(20.0));
        let bad = vec![("method.transmitter".to_string(), "65".to_string())];
        assert!(matches!(parse_config_with(REFERENCE, &bad), Err(Error::Config { field, .. }) if field == "method.transmitter"));
    }
}
