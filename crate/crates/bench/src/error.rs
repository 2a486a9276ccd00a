use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Kernel(#[from] densekrp::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("tensor file format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },
    #[error("usage: {0}")]
    Usage(String),
    #[error("check failed: {0}")]
    Check(String),
}

pub type Result<T> = std::result::Result<T, BenchError>;
