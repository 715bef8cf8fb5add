use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A configuration invariant does not hold. The payload names it.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid stream layout: {0}")]
    Layout(String),

    #[error("precoder design failed: {0}")]
    Precoder(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
