use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unsupported singular kernel: {0}")]
    UnsupportedKernel(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("linear solve failed: {0}")]
    Solve(String),
    #[error("numerical abort: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed artifact: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
