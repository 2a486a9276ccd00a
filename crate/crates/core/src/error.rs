use thiserror::Error;

/// Errors raised by the tensor, kernel and ALS layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("index out of bounds: {0}")]
    Bounds(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),
}

pub type Result<T> = std::result::Result<T, Error>;
