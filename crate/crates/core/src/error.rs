use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A matrix failed the density-operator checks (Hermiticity, trace, positivity).
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    /// A computed quantity broke a bound that holds mathematically, e.g. a
    /// discord value well below zero.
    #[error("internal consistency failure: {0}")]
    Consistency(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid_arg(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
