use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong between reading a record and scoring a
/// prediction. Variants carry enough context (paths, line numbers, lead
/// names) that a CLI can print them verbatim.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed text input: WFDB header, CSV signal, feature table,
    /// config or model file. `line` is 1-based.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("unsupported WFDB signal format {format}; only format 16 is supported")]
    UnsupportedFormat { format: String },

    #[error(
        "{path}: sample data does not match header: expected {expected} bytes, file has {actual}"
    )]
    SampleSizeMismatch {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("lead {lead:?}: ADC gain must be non-zero")]
    ZeroGain { lead: String },

    #[error("unknown lead {requested:?}; available leads: {available}")]
    UnknownLead {
        requested: String,
        available: String,
    },

    #[error("invalid record: {msg}")]
    InvalidRecord { msg: String },

    #[error("{what} contains non-finite values")]
    NonFinite { what: &'static str },

    #[error("{what}: need at least {min} samples, got {got}")]
    TooShort {
        what: &'static str,
        min: usize,
        got: usize,
    },

    #[error("matrix dimensions do not match: {left} vs {right}")]
    DimensionMismatch { left: String, right: String },

    #[error("invalid scale grid: {msg}")]
    InvalidGrid { msg: String },

    #[error("analysis window out of bounds: {msg}")]
    WindowOutOfBounds { msg: String },

    #[error("invalid parameter: {msg}")]
    InvalidParameter { msg: String },

    #[error("feature {feature:?} has zero variance in the training set")]
    ZeroVariance { feature: &'static str },

    #[error("training data must contain both classes: {msg}")]
    SingleClass { msg: String },

    #[error("synthetic beat spec is inconsistent with class {class}: {msg}")]
    InconsistentSpec { class: String, msg: String },

    #[error("no usable beats: {msg}")]
    NoBeats { msg: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
