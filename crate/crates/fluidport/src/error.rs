use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("selector returned out-of-range port index {index} for N={n_ports}")]
    SelectorOutOfRange { index: usize, n_ports: usize },

    #[error("insufficient training budget: {0}")]
    InsufficientBudget(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("serialization format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
