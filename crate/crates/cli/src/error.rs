use thiserror::Error;

/// Failure of a subcommand, carrying its exit code class.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] scenewire::Error),
    #[error("inference failed: {0}")]
    Inference(scenewire::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Inference(_) => 3,
        }
    }
}
