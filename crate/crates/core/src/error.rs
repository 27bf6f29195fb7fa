use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("model validity: {0}")]
    ModelValidity(String),

    #[error("input stream is not time-sorted at index {index}")]
    UnsortedInput { index: usize },

    #[error("finite-size bound invalid: requires eps1/4 > 2 f(p_alpha, n_T), got eps1/4 = {quarter_eps:e} <= 2f = {two_f:e}")]
    FiniteSizeBoundInvalid { quarter_eps: f64, two_f: f64 },

    #[error("inconsistent measurement: {0}")]
    InconsistentMeasurement(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("insufficient data: {test} needs at least {needed} bits, got {got}")]
    InsufficientData {
        test: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("index ({row}, {col}) out of range for {rows}x{cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("zero extractable output: bits per sample is zero, the protocol must abort instead")]
    ZeroOutput,

    #[error("extraction refused: certificate verdict is abort")]
    AbortedCertificate,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed file: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

/// Rejects NaN, infinities and values `<= 0`.
pub(crate) fn require_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite and > 0, got {value}")))
    }
}

pub(crate) fn require_probability(name: &str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must lie in [0, 1], got {value}")))
    }
}
