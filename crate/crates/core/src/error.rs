use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied an invalid argument (shape, range, normalization).
    #[error("invalid argument: {0}")]
    Argument(String),
    /// An internal consistency check failed, e.g. a violated monogamy bound.
    #[error("numerical consistency: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
