use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report. `category()` gives the stable
/// machine-readable tag used by the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range 1..={len}")]
    Index { index: usize, len: usize },

    #[error("{field}: {detail}")]
    Config { field: String, detail: String },

    #[error("line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error("coincident points at distance {distance:e}")]
    Singularity { distance: f64 },

    #[error("{kind} dictionary needs more pixels than measurements (N = {pixels}, rows = {rows})")]
    SparsityRegime { kind: &'static str, pixels: usize, rows: usize },

    #[error("{0}")]
    Parameter(String),

    #[error("{0}")]
    Data(String),

    #[error("{0}")]
    Numeric(String),

    #[error("residual bound {beta:e} is below the smallest attainable residual {min_residual:e}")]
    Infeasible { beta: f64, min_residual: f64 },

    #[error("no convergence after {iterations} iterations (primal {primal:e}, dual {dual:e})")]
    IterationLimit { iterations: usize, primal: f64, dual: f64 },

    #[error("no admissible atom reduces the residual (residual {residual:e})")]
    Stall { residual: f64 },

    #[error("transmit integral too small at pixel {pixel}")]
    DivisionGuard { pixel: usize },

    #[error("all block norms are zero")]
    NoSignal,

    #[error("enumeration of {subsets} subsets exceeds the limit {limit}")]
    Refusal { subsets: u128, limit: u128 },

    #[error("null-space constant {rho} >= 1, bound does not apply")]
    BoundInapplicable { rho: f64 },

    #[error("integral {value:e} is below the guard")]
    DegenerateGeometry { value: f64 },

    #[error("{0}")]
    Corruption(String),

    #[error("{0}")]
    Format(String),

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Config { field: field.into(), detail: detail.into() }
    }

    pub fn category(&self) -> &'static str {
        match self {
            Error::Index { .. } => "index",
            Error::Config { .. } => "config",
            Error::Parse { .. } => "parse",
            Error::Singularity { .. } => "singularity",
            Error::SparsityRegime { .. } => "sparsity-regime",
            Error::Parameter(_) => "parameter",
            Error::Data(_) => "data",
            Error::Numeric(_) => "numeric",
            Error::Infeasible { .. } => "infeasible",
            Error::IterationLimit { .. } => "iteration-limit",
            Error::Stall { .. } => "stall",
            Error::DivisionGuard { .. } => "division-guard",
            Error::NoSignal => "no-signal",
            Error::Refusal { .. } => "refusal",
            Error::BoundInapplicable { .. } => "bound-inapplicable",
            Error::DegenerateGeometry { .. } => "degenerate-geometry",
            Error::Corruption(_) => "corruption",
            Error::Format(_) => "format",
            Error::Usage(_) => "usage",
            Error::Io(_) => "io",
        }
    }

    /// 1 for anything the user can fix by changing inputs, 2 for failures
    /// that arise while computing.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Singularity { .. }
            | Error::Numeric(_)
            | Error::Infeasible { .. }
            | Error::IterationLimit { .. }
            | Error::Stall { .. }
            | Error::DivisionGuard { .. }
            | Error::NoSignal
            | Error::Refusal { .. }
            | Error::BoundInapplicable { .. }
            | Error::DegenerateGeometry { .. } => 2,
            _ => 1,
        }
    }
}
