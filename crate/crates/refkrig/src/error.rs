use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    /// A malformed or inconsistent config file, located as `origin:line:column`.
    #[error("{origin}:{line}:{column}: {message}")]
    Config { origin: String, line: usize, column: usize, message: String },
    #[error("{0}")]
    Data(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    /// The existence checklist does not cover the model and `--force` was not given.
    #[error("existence gate: {0}")]
    Existence(String),
    #[error(transparent)]
    Core(#[from] refkrig_core::Error),
}

impl CliError {
    /// Process exit status: 2 for the existence gate, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Existence(_) | CliError::Core(refkrig_core::Error::ExistenceViolation(_)) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
