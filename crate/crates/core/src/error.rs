use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator, the diagnostics, and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected} values, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("Poisson problem is ill-posed on the torus: input mean {mean:e} exceeds {tolerance:e}")]
    NonZeroMean { mean: f64, tolerance: f64 },

    #[error("director outside the angle chart at grid point {index:?}: d = {d:?}")]
    BranchViolation { index: [usize; 3], d: [f64; 3] },

    #[error("angle phi_2 = {phi2} at grid point {index:?} leaves the chart (margin {margin} rad)")]
    ChartMargin { index: [usize; 3], phi2: f64, margin: f64 },

    #[error("non-finite value in {what} at grid point {index:?}")]
    NonFinite { what: String, index: [usize; 3] },

    #[error("flow-map deformation did not converge ({0}); use a smaller amplitude")]
    FlowMap(String),

    #[error("unknown manufactured solution `{0}`")]
    UnknownManufactured(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("index {0} out of range (expected 1..=3)")]
    BadIndex(usize),

    #[error("vector-field order {0} exceeds the cap of 3")]
    OrderTooHigh(usize),

    #[error("field support reaches {support:.4} + t = {t:.4} beyond the valid window {limit:.4}")]
    WindowViolation { support: f64, t: f64, limit: f64 },

    #[error("run record too short: need {needed} snapshots around the evaluation point, have {have}")]
    InsufficientRecord { needed: usize, have: usize },

    #[error("series too short: {0} samples (at least 5 required)")]
    SeriesTooShort(usize),

    #[error("jet order {have} too low, {needed} required")]
    JetOrder { needed: usize, have: usize },

    #[error("config error at line {line}, key `{key}`: {message}")]
    Config { key: String, line: usize, message: String },

    #[error("constraint `{name}` violated: residual {value:e} exceeds abort threshold {limit:e} at t = {t}")]
    ConstraintViolation {
        name: &'static str,
        value: f64,
        limit: f64,
        t: f64,
        last_checkpoint: Option<PathBuf>,
    },

    #[error("bad checkpoint header: {0}")]
    Checkpoint(String),

    #[error("formulation mismatch: {0}")]
    Formulation(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
