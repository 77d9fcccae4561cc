//! Error type shared by every module of the crate.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("ill-conditioned kernel matrix: {0}")]
    IllConditioned(String),

    #[error("numerical domain error: {0}")]
    NumericalDomain(String),

    #[error("responsibility underflow at row {row}")]
    ResponsibilityUnderflow { row: usize },

    #[error("fit diverged at iteration {iteration}: free energy is {value}")]
    Diverged { iteration: usize, value: f64 },

    #[error("degenerate copula marginals: {0}")]
    DegenerateMarginals(String),

    #[error("insufficient data: need at least {required} observations, got {actual}")]
    InsufficientData { required: usize, actual: usize },

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("model file error: {0}")]
    ModelFile(String),

    #[error("GARCH fit did not converge (best omega={omega:e}, a={a}, b={b})")]
    GarchNotConverged { omega: f64, a: f64, b: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
