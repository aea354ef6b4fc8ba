use thiserror::Error;

pub type Result<T> = std::result::Result<T, MgError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MgError {
    /// A parameter violated its documented range or shape constraint.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Two independent computations of the same quantity disagreed.
    #[error("internal consistency check failed: {0}")]
    Consistency(String),
}

impl MgError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        MgError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
