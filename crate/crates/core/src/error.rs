use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("constraint violation: {0}")]
    ConstraintViolation(String),
    #[error("unsupported dimension {0}: {1}")]
    UnsupportedDimension(usize, &'static str),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("objective evaluation failed at iteration {iteration}: {source}")]
    Objective {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn at_iteration(self, iteration: usize) -> Self {
        Error::Objective {
            iteration,
            source: Box::new(self),
        }
    }
}
