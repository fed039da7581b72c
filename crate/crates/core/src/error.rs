use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced anywhere in the SetConv pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    Dimension {
        op: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("empty input to {0}")]
    EmptyInput(&'static str),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("minority set is empty; cannot compute an anchor")]
    EmptyMinority,

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("class {class} has {count} samples; at least {required} required")]
    InsufficientData {
        class: usize,
        count: usize,
        required: usize,
    },

    #[error("length mismatch: {left} labels vs {right} predictions")]
    LengthMismatch { left: usize, right: usize },

    #[error("AUC is undefined when only one class is present")]
    UndefinedAuc,

    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("{path}:{line}: expected {expected} fields, found {found}")]
    RaggedRow {
        path: String,
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("{path}:{line}: column '{column}' holds non-numeric value '{value}'")]
    NonNumeric {
        path: String,
        line: u64,
        column: String,
        value: String,
    },

    #[error("label column '{0}' not found in header")]
    UnknownLabelColumn(String),

    #[error("unsupported model format version {found} (this build reads version {expected})")]
    ModelVersion { found: u32, expected: u32 },

    #[error("malformed model file: {0}")]
    MalformedModel(String),

    #[error("inconsistent model shapes: {0}")]
    ShapeInconsistency(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, expected: usize, found: usize) -> Self {
        Error::Dimension {
            op,
            expected,
            found,
        }
    }
}
