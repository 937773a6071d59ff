use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("non-finite value appeared at step {step}")]
    NumericFailure { step: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidInput(alloc::format!($($arg)*))
    };
}
pub(crate) use invalid;

pub(crate) fn shape_err(expected: (usize, usize), got: (usize, usize)) -> Error {
    Error::ShapeMismatch {
        expected: alloc::format!("{}x{}", expected.0, expected.1),
        got: alloc::format!("{}x{}", got.0, got.1),
    }
}
