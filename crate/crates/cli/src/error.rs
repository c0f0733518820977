use thiserror::Error;

/// Failure of a command, carrying its exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or a missing input file; exit 2.
    #[error("{0}")]
    Usage(String),
    /// Input that could not be parsed or estimated; exit 1.
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 1,
        }
    }
}

impl From<liq_core::Error> for CliError {
    fn from(e: liq_core::Error) -> Self {
        match e {
            liq_core::Error::InvalidArgument(m) => CliError::Usage(m),
            other => CliError::Data(other.to_string()),
        }
    }
}
