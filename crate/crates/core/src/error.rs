//! Error types shared across the crate.

use thiserror::Error;

/// Errors surfaced by data loading, model evaluation, optimization and the
/// privacy mechanisms.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("schema error: missing column `{0}`")]
    MissingColumn(String),

    #[error("parse error at data row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("value error at data row {row}: {msg}")]
    Value { row: usize, msg: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("index {index} out of range for {len} records")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("optimizer did not converge: {0}")]
    NonConvergence(String),

    #[error("chain error at step {step}: {msg}")]
    Chain { step: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by bad user input (config, schema, file
    /// contents) as opposed to runtime numerical failures. CLI front ends
    /// use this to pick exit codes.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::MissingColumn(_)
                | Error::Parse { .. }
                | Error::Value { .. }
                | Error::EmptyDataset
                | Error::IndexOutOfRange { .. }
                | Error::Shape(_)
                | Error::Domain(_)
                | Error::Csv(_)
        )
    }
}
