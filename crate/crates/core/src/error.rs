use std::io;

use thiserror::Error;

pub type Result<T, E = PdhError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PdhError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("class {class} has {count} image(s); at least 2 are needed to form a pair")]
    ClassTooSmall { class: usize, count: usize },

    #[error("class {class} out of range (classes: {num_classes})")]
    ClassOutOfRange { class: usize, num_classes: usize },

    #[error("forward trace does not match the parameters it is used with")]
    TraceMismatch,

    #[error("training diverged at step {step}: loss = {loss}")]
    Divergence { step: usize, loss: f64 },

    #[error("code book is empty")]
    EmptyBook,

    #[error("duplicate id {0} in code book")]
    DuplicateId(u64),

    #[error("bit {bit}: family side S^{side} is empty")]
    EmptySide { bit: usize, side: u8 },

    #[error("point {point} has zero probability under every class")]
    ZeroProbability { point: usize },

    #[error("every query was skipped (no relevant gallery items)")]
    AllQueriesSkipped,

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl PdhError {
    /// True for errors caused by bad caller input rather than bad data.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            PdhError::InvalidConfig(_) | PdhError::InvalidArgument(_)
        )
    }
}
