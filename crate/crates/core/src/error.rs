use thiserror::Error;

/// Errors raised by the engine.
///
/// The variants follow the failure classes of the operations: bad arguments,
/// operations attempted on a store in the wrong state, invalid environment or
/// operator configuration, malformed data, and runtime invariant violations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaiError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("invariant `{name}` violated: {detail}")]
    Invariant { name: &'static str, detail: String },
}

impl MaiError {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        MaiError::Input(msg.into())
    }

    pub(crate) fn state(msg: impl Into<String>) -> Self {
        MaiError::State(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        MaiError::Config(msg.into())
    }

    pub(crate) fn invariant(name: &'static str, detail: impl Into<String>) -> Self {
        MaiError::Invariant {
            name,
            detail: detail.into(),
        }
    }
}

pub type Result<T, E = MaiError> = std::result::Result<T, E>;
