use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("data validation failed: {0}")]
    DataValidation(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate loss derivative: {0}")]
    DegenerateDerivative(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("unsupported document version: {0}")]
    Version(String),

    #[error("malformed model document: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
