use std::path::Path;

/// Failure of a command, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Numeric(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<ddlab_core::Error> for CliError {
    fn from(e: ddlab_core::Error) -> Self {
        use ddlab_core::Error as E;
        match e {
            E::Config(_) | E::Domain(_) => CliError::Validation(e.to_string()),
            E::Io(_) | E::Format { .. } => CliError::Io(e.to_string()),
            E::Numeric(_) | E::Fit { .. } => CliError::Numeric(e.to_string()),
        }
    }
}

/// Attaches the offending path to a core error.
pub fn at(path: &Path) -> impl FnOnce(ddlab_core::Error) -> CliError + '_ {
    move |e| match CliError::from(e) {
        CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
        CliError::Io(m) => CliError::Io(format!("{}: {m}", path.display())),
        CliError::Numeric(m) => CliError::Numeric(format!("{}: {m}", path.display())),
    }
}

pub fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}
