use thiserror::Error;

/// Errors raised by the toolkit.
///
/// The variants line up with the CLI exit codes: `Config`/`Domain` are
/// validation failures, `Io`/`Format` are persistence failures and
/// `Numeric`/`Fit` are numerical breakdowns.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parameter domain error: {0}")]
    Domain(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("fit failure ({family}): {reason}")]
    Fit { family: String, reason: String },
    #[error("format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
