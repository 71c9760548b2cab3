use thiserror::Error;

/// Errors raised by the simulation engine.
#[derive(Debug, Error)]
pub enum Error {
    /// A point outside the domain of a function (boundary gradient, zero reference, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// An environment, regularizer or learner setting that cannot be honoured.
    #[error("configuration error: {0}")]
    Config(String),
    /// A malformed call argument, such as a context outside the unit cube.
    #[error("input error: {0}")]
    Input(String),
    /// The horizon cannot afford one pull per arm in every bin.
    #[error("sizing error: {0}")]
    Sizing(String),
    /// A sampled loss violated the `[0, 1]` contract.
    #[error("data error: {0}")]
    Data(String),
    /// The presampling mixture weight reached or exceeded one half.
    #[error("presampling weight {alpha} is not below 1/2")]
    PresampleTooLarge { alpha: f64 },
    /// A user-facing setting failed validation.
    #[error("invalid `{key}`: {message}")]
    Validation { key: String, message: String },
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
