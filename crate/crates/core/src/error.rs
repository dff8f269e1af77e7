use thiserror::Error;

/// Errors produced by the analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A matrix or list does not have the required shape.
    #[error("structural error: {0}")]
    Structural(String),

    /// A covariance matrix or moment set violates the uncertainty principle.
    #[error("unphysical input: {0}")]
    Unphysical(String),

    #[error("post-selection region [{eta_min}, {eta_max}] contains no sub-channel")]
    EmptySelection { eta_min: f64, eta_max: f64 },

    #[error("no ensemble points retained by post-selection")]
    EmptyEnsemble,

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("quadrature did not converge: achieved error {achieved:e}, tolerance {tolerance:e}")]
    Quadrature { achieved: f64, tolerance: f64 },

    #[error("sample {index} is outside [0, 1]: {value}")]
    SampleOutOfRange { index: usize, value: f64 },

    /// Invalid command-line usage; carries the rendered usage text.
    #[error("{0}")]
    Usage(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
