use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config or input data. Exit code 2.
    #[error("{0}")]
    Usage(String),

    /// The numerics failed: non-convergence or integrator drift. Exit code 3.
    #[error("{0}")]
    Numerical(String),

    /// Reading or writing files failed. Exit code 1.
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Numerical(_) => 3,
            Self::Io(_) => 1,
        }
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl From<ionqho::Error> for CliError {
    fn from(e: ionqho::Error) -> Self {
        if e.is_numerical() {
            return Self::Numerical(e.to_string());
        }
        match e {
            ionqho::Error::Io(io) => Self::Io(io.to_string()),
            other => Self::Usage(other.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Usage(format!("invalid JSON: {e}"))
    }
}
