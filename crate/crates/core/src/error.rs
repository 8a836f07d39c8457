use thiserror::Error;

/// Errors raised by the separation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {actual}")]
    DimensionMismatch { op: &'static str, expected: String, actual: String },

    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid hyperparameter `{name}`: {reason}")]
    InvalidHyperparameter { name: &'static str, reason: String },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(op: &'static str, expected: (usize, usize), actual: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            op,
            expected: format!("{}x{}", expected.0, expected.1),
            actual: format!("{}x{}", actual.0, actual.1),
        }
    }

    pub(crate) fn len(op: &'static str, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch { op, expected: expected.to_string(), actual: actual.to_string() }
    }
}
