use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("kernel family mismatch: operation requires {expected}")]
    WrongKernelFamily { expected: &'static str },

    #[error("axis {axis} has {len} samples; at least 2 are required")]
    AxisTooShort { axis: usize, len: usize },

    #[error("solve failed{}: {reason}", level_suffix(.level))]
    SolveFailure { level: Option<usize>, reason: String },

    #[error("integer overflow while evaluating {0}")]
    Overflow(&'static str),

    #[error("parse error at line {line}: {reason}")]
    Csv { line: usize, reason: String },

    #[error("model file format error: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn level_suffix(level: &Option<usize>) -> String {
    match level {
        Some(l) => format!(" at hierarchy level {l}"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
