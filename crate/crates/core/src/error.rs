use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("empty vector")]
    Empty,
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("n = {n} exceeds the desk-scale limit of {limit}; a dataset would need about {required_bytes} bytes")]
    Capacity {
        n: usize,
        limit: usize,
        required_bytes: u128,
    },
    #[error("dataset has {available} samples but {needed} were requested")]
    DataExhausted { needed: usize, available: usize },
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("malformed dataset file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
