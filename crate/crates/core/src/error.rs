use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no critical point: radicand {radicand} is not positive for delta = {delta} on the {branch} branch")]
    NoCriticalPoint {
        delta: f64,
        branch: &'static str,
        radicand: f64,
    },

    #[error("eigensolver did not converge: best residual {best_residual:e} exceeds tolerance {tol:e}")]
    NotConverged { best_residual: f64, tol: f64 },

    #[error("truncation ladder hit the cap n_tr = {n_tr} without converging (last two values {previous} and {last})")]
    TruncationCap { n_tr: usize, previous: f64, last: f64 },

    #[error("ground state is degenerate (E1 - E0 = {gap:e}); state-dependent quantities are gauge-undefined")]
    GaugeUndefined { gap: f64 },

    #[error("eigenstate sum tail is not decreasing or not negligible at k_states = {k_states}; increase k_states")]
    SumTailNotDecreasing { k_states: usize },

    #[error("coupling step {step:e} is below the roundoff floor {floor:e}")]
    StepBelowRoundoff { step: f64, floor: f64 },

    #[error("no sign change of the spectral condition for level {level} inside ({lo}, {hi})")]
    NoSignChange { level: usize, lo: f64, hi: f64 },

    #[error("coupling g = {g} is at or above the critical coupling {g_c}: the discrete levels have collapsed")]
    AboveCritical { g: f64, g_c: f64 },

    #[error("non-positive data in fit window at abscissae {0:?}")]
    NonPositiveData(Vec<f64>),

    #[error("fit window ({lo}, {hi}) holds {found} usable points, need at least {needed}")]
    TooFewPoints {
        lo: f64,
        hi: f64,
        found: usize,
        needed: usize,
    },

    #[error("collapse has an empty overlap range")]
    EmptyOverlap,

    #[error("maximum lies on the bracket boundary at g = {at}; widen the bracket")]
    PeakAtBoundary { at: f64 },

    #[error("{0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed CSV in {path}, line {line}: {reason}")]
    Csv { path: PathBuf, line: usize, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Numerical failures map to exit status 1; configuration problems are usage errors.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Json(_))
    }
}
