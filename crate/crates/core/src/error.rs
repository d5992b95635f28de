use thiserror::Error;

/// Errors raised by every fallible operation in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LshError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension {dim} too large for {operation} (limit {limit}); {hint}")]
    TooLarge {
        operation: &'static str,
        dim: usize,
        limit: usize,
        hint: &'static str,
    },

    #[error("family has no finite support; {0}")]
    NotFinite(&'static str),

    #[error("degenerate q: {0}")]
    DegenerateQ(String),

    #[error("label space overflow: {0}")]
    LabelOverflow(String),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl LshError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        LshError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for LshError {
    fn from(err: std::io::Error) -> Self {
        LshError::Io(err.to_string())
    }
}

impl From<serde_json::Error> for LshError {
    fn from(err: serde_json::Error) -> Self {
        LshError::Parse(err.to_string())
    }
}

pub type Result<T, E = LshError> = std::result::Result<T, E>;
