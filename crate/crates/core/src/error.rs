use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("no resonance: {0}")]
    NoResonance(String),
    #[error("missing state: {0}")]
    MissingState(String),
    #[error("degenerate weight: {0}")]
    DegenerateWeight(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("eigensolver failure: {0}")]
    Eigen(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
