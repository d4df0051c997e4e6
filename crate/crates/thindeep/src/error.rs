use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its admissible domain (non-positive variance,
    /// non-PD lengthscale matrix, bad shapes in a configuration, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A numerical routine failed (factorization at maximum jitter, singular
    /// system, ...). The message carries matrix diagnostics where available.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Dimension mismatch between operands.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Malformed input file.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Non-finite value encountered for a named trainable parameter.
    #[error("non-finite {what} for parameter `{param}`")]
    NonFinite { what: &'static str, param: String },

    /// Invalid run configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
