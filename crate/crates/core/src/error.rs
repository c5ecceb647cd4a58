use thiserror::Error;

/// Errors produced by the optimization engine and its components.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("coordinate {dimension} = {value} lies outside [{lower}, {upper}]")]
    OutOfBounds {
        dimension: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("sample duplicates existing sample {existing}")]
    DuplicateSample { existing: usize },

    #[error("point coincides with an anchor; IDW weight is singular")]
    Singular,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid response: {0}")]
    InvalidResponse(String),

    #[error("no pending query")]
    NoPendingQuery,

    #[error("run completed")]
    Completed,

    #[error("QP solver failed: {status:?} after {iterations} iterations (primal residual {primal_residual:.3e})")]
    Solver {
        status: crate::qp::QpStatus,
        iterations: usize,
        primal_residual: f64,
    },

    #[error("malformed JSON: {0}")]
    Json(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
