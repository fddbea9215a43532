use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error(
        "coordinate {index} is on the boundary ({value}); partial derivatives need 0 < u_j < 1"
    )]
    Boundary { index: usize, value: f64 },

    #[error("numerical failure: {message} (achieved tolerance {achieved:e})")]
    Numeric { message: String, achieved: f64 },

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error("generator density is not finite on the quadrature grid: {0}")]
    SingularGenerator(String),

    #[error("column {0} is constant; pseudo-observations are undefined")]
    DegenerateMargin(usize),

    #[error("unsupported input: {0}")]
    UnsupportedInput(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
