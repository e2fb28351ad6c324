use thiserror::Error;

/// Process-level failure, mapped onto the exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Validation(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("run failed: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) | Self::Input(_) => 2,
            Self::Runtime(_) => 3,
        }
    }
}

impl From<mai_core::MaiError> for CliError {
    fn from(e: mai_core::MaiError) -> Self {
        Self::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(format!("i/o error: {e}"))
    }
}
