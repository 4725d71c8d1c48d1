//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failure modes of the library; each maps to a distinct CLI exit code.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LdError {
    /// Invalid input: malformed template, inconsistent model parameters, ...
    #[error("validation error: {0}")]
    Validation(String),
    /// A configured enumeration cap (degree, vertex count, state budget) was exceeded.
    #[error("cap exceeded: {0}")]
    CapExceeded(String),
    /// The Gram matrix is too far from the identity to be inverted safely.
    #[error("singular Gram matrix: {0}")]
    SingularGram(String),
}

impl LdError {
    /// Process exit code associated with the error kind.
    pub fn exit_code(&self) -> i32 {
        match self {
            LdError::Validation(_) => 2,
            LdError::CapExceeded(_) => 3,
            LdError::SingularGram(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, LdError>;

/// Shorthand for building a validation error.
pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(LdError::Validation(msg.into()))
}

/// Shorthand for building a cap-exceeded error.
pub(crate) fn cap<T>(msg: impl Into<String>) -> Result<T> {
    Err(LdError::CapExceeded(msg.into()))
}
