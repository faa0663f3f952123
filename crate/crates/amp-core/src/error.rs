use thiserror::Error;

/// Errors surfaced by the public API.
#[derive(Debug, Error)]
pub enum AmpError {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),

    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },

    #[error("kernel argument outside domain: {0}")]
    KernelDomain(String),

    #[error("linear solve failed: {0}")]
    SolveFailed(String),

    #[error("eigensolver failed: {0}")]
    EigenFailed(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AmpError>;
