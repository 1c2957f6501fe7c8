use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum QError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("register of {requested} qubits exceeds the {max}-qubit cap")]
    Capacity { requested: usize, max: usize },
}

impl QError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        QError::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, QError>;
