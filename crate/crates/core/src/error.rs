use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A design parameter or function argument is outside its domain.
    #[error("invalid {field}: {reason}")]
    Parameter { field: String, reason: String },

    /// The trial state is inconsistent with the requested operation.
    #[error("invalid trial state: {0}")]
    State(String),

    /// A numerical routine failed to reach its accuracy target.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn parameter(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn state(reason: impl Into<String>) -> Self {
        Error::State(reason.into())
    }

    /// Name of the offending field, when the error is tied to one.
    pub fn field(&self) -> Option<&str> {
        match self {
            Error::Parameter { field, .. } => Some(field),
            _ => None,
        }
    }
}
