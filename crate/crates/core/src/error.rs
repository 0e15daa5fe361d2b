use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid covariance model: {0}")]
    InvalidModel(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singularity: {0}")]
    Singular(String),
    #[error("aliasing: {0}")]
    Aliasing(String),
    #[error("insufficient accuracy: {0}")]
    Accuracy(String),
    #[error("solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    Solver {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },
    #[error("model mismatch: {0}")]
    ModelMismatch(String),
    #[error("inconsistent input: {0}")]
    Inconsistent(String),
    #[error("unsupported layout: {0}")]
    Layout(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
