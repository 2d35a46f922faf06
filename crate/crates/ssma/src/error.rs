//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Structural validation of a dataset or matrix failed.
    #[error("invalid data: {0}")]
    Validation(String),

    /// A parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Not enough labeled data for the requested operation.
    #[error("insufficient labels: {0}")]
    Labels(String),

    /// A numerical routine failed (singular pencil, rank-zero projector, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A text format could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// An experiment or run configuration is inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for CLI use: 3 for data problems, 4 for numerical ones.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Numerical(_) => 4,
            _ => 3,
        }
    }
}
