use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised across the decoding pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no runs found in session directory {0}")]
    NoRuns(PathBuf),

    #[error("session header {path}: {reason}")]
    Header { path: PathBuf, reason: String },

    #[error("run file {path}: expected {expected} bytes, found {found}")]
    DataLength {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error("events file {path}: unknown event kind `{kind}` at entry {index}")]
    UnknownEventKind {
        path: PathBuf,
        kind: String,
        index: usize,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid recording: {0}")]
    InvalidRecording(String),

    #[error("invalid filter design: {0}")]
    FilterDesign(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("signal too short: need more than {needed} samples, got {got}")]
    SignalTooShort { needed: usize, got: usize },

    #[error("nonpositive baseline power at channel {channel}, {freq_hz} Hz")]
    NonPositiveBaseline { channel: String, freq_hz: f64 },

    #[error("rank-deficient EOG covariance (condition estimate {condition:.3e})")]
    RankDeficient { condition: f64 },

    #[error("matrix is not symmetric positive-definite: {0}")]
    NotSpd(String),

    #[error("Fréchet mean did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        last: nalgebra::DMatrix<f64>,
    },

    #[error("both classes must be present: {0}")]
    SingleClass(String),

    #[error("missing condition {0} in epoch list")]
    MissingCondition(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Stable snake_case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NoRuns(_) => "no_runs",
            Error::Header { .. } => "header",
            Error::DataLength { .. } => "data_length",
            Error::UnknownEventKind { .. } => "unknown_event_kind",
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
            Error::InvalidRecording(_) => "invalid_recording",
            Error::FilterDesign(_) => "filter_design",
            Error::Dimension(_) => "dimension",
            Error::SignalTooShort { .. } => "signal_too_short",
            Error::NonPositiveBaseline { .. } => "nonpositive_baseline",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::NotSpd(_) => "not_spd",
            Error::NoConvergence { .. } => "no_convergence",
            Error::SingleClass(_) => "single_class",
            Error::MissingCondition(_) => "missing_condition",
            Error::InvalidArgument(_) => "invalid_argument",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
