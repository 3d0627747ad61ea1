use thiserror::Error;

/// Errors raised by the inference engine and its I/O helpers.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or invalid input data. `row` is 1-based over data rows (header excluded).
    #[error("row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// The sampler hit a non-finite target or likelihood.
    #[error("sampler failure: {0}")]
    Sampler(String),

    #[error("chain too short: need at least {needed} draws, got {got}")]
    ShortChain { needed: usize, got: usize },

    #[error("unknown parameter or identifier: {0}")]
    Unknown(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True when the error stems from user input rather than from sampling.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Sampler(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
