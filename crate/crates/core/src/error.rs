use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "RAM budget of {budget} words cannot hold one row of {row_words} words \
         plus {reserve} words of workspace"
    )]
    BudgetTooSmall {
        budget: u64,
        row_words: u64,
        reserve: u64,
    },

    #[error(
        "non-finite value encountered during {context}; rerun with prescaling \
         enabled to process A/||A||_2 instead of A"
    )]
    NonFinite { context: String },

    #[error("malformed matrix file at byte offset {offset}: {reason}")]
    Format { offset: u64, reason: String },

    #[error("failed to read matrix block at byte offset {offset}: {source}")]
    BlockRead {
        offset: u64,
        #[source]
        source: std::io::Error,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn non_finite(context: impl Into<String>) -> Self {
        Error::NonFinite {
            context: context.into(),
        }
    }
}
