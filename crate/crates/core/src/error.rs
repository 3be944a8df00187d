use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value at step {step}: {context}")]
    NonFinite { step: usize, context: String },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("density {value:e} below floor at step {step}")]
    DensityFloor { step: usize, value: f64 },

    #[error("sample source exhausted after {consumed} of {requested} steps")]
    SourceExhausted { consumed: usize, requested: usize },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("chain is not unichain: power iteration did not converge within {iterations} iterations")]
    NotUnichain { iterations: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn non_finite(context: impl Into<String>) -> Self {
        Error::NonFinite {
            step: 0,
            context: context.into(),
        }
    }

    pub(crate) fn mismatch(what: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            what: what.into(),
            expected,
            found,
        }
    }

    /// Re-tags step-local failures with the sampler step that produced them.
    pub fn at_step(self, step: usize) -> Self {
        match self {
            Error::NonFinite { context, .. } => Error::NonFinite { step, context },
            Error::DensityFloor { value, .. } => Error::DensityFloor { step, value },
            other => other,
        }
    }
}
