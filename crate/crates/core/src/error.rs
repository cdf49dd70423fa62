use thiserror::Error;

use crate::tensor::Shape;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left} vs {right}")]
    DimensionMismatch {
        op: &'static str,
        left: Shape,
        right: Shape,
    },

    #[error("{op}: spatial dims {height}x{width} not divisible by {divisor}; pad the input first")]
    NotDivisible {
        op: &'static str,
        height: usize,
        width: usize,
        divisor: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("backward requires a scalar root, got {0}")]
    NonScalarRoot(Shape),

    #[error("missing gradient for parameter `{0}`")]
    MissingGradient(String),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("malformed image: {0}")]
    Image(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag used by the command line error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NotDivisible { .. } => "not_divisible",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NonScalarRoot(_) => "non_scalar_root",
            Error::MissingGradient(_) => "missing_gradient",
            Error::UnknownParameter(_) => "unknown_parameter",
            Error::Image(_) => "image",
            Error::Checkpoint(_) => "checkpoint",
            Error::Config(_) => "config",
            Error::Dataset(_) => "dataset",
            Error::Io(_) => "io",
        }
    }
}
