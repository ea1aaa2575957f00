use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A precondition on the inputs was violated.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// Input lies outside the domain where the formula applies.
    #[error("domain error: {0}")]
    Domain(String),
    /// The limit of `x * h(1/x)` at zero could not be pinned down.
    #[error("eta undetermined: {0}")]
    EtaUndetermined(String),
    #[error("unsupported payoff: {0}")]
    UnsupportedPayoff(String),
    /// A numerical routine failed to converge or produced no usable samples.
    #[error("numerical diagnostics: {0}")]
    Diagnostics(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    /// True for errors caused by bad inputs rather than numerical failure.
    pub fn is_argument(&self) -> bool {
        matches!(
            self,
            Error::Argument(_) | Error::Domain(_) | Error::UnsupportedPayoff(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
