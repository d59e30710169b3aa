use thiserror::Error;

use crate::train::Snapshot;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty batch: {0}")]
    EmptyBatch(&'static str),

    /// A gradient or loss contained NaN/Inf; the index is the flat parameter index.
    #[error("non-finite value at parameter {index} (layer {layer}, {location})")]
    NonFiniteParameter {
        index: usize,
        layer: usize,
        location: String,
    },

    #[error("non-finite loss at step {step}")]
    NumericAbort {
        step: usize,
        last_finite: Option<Box<Snapshot>>,
    },

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(&'static str),

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Checkpoint and config file format failures.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic bytes: not a checkpoint file")]
    BadMagic,
    #[error("unsupported checkpoint format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("truncated file: expected {expected} payload bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("inconsistent shapes: {0}")]
    ShapeInconsistency(String),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
}
