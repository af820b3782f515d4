use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("value overflows f64 (ln|value| = {ln_abs})")]
    Overflow { ln_abs: f64 },

    #[error("quadrature did not converge: {0}")]
    Convergence(String),

    #[error("linear solve failed (condition estimate {condition:.3e}): {reason}")]
    IllConditioned { condition: f64, reason: String },

    #[error("linear algebra failure: {0}")]
    LinAlg(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
