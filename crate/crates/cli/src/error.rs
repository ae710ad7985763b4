use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration, overrides or input files. Exit code 2.
    #[error("validation error: {0}")]
    Validation(String),

    /// A solver, fit or integrator failed. Exit code 3.
    #[error("numerical failure: {0}")]
    Numerical(pushsim::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 1,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io { path: path.as_ref().display().to_string(), source }
    }
}

impl From<pushsim::Error> for CliError {
    fn from(e: pushsim::Error) -> Self {
        match e {
            pushsim::Error::InvalidParameter { .. } => CliError::Validation(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
