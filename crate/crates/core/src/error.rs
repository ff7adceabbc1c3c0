//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mode priors: {0}")]
    InvalidPriors(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("input out of domain: {0}")]
    Domain(String),

    #[error("ambiguous mode: top two coordinates are equal ({0})")]
    AmbiguousMode(f64),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("label length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("KL support violation at index {index}: q is zero where p is positive")]
    SupportViolation { index: usize },

    #[error("non-finite loss at step {step}: d={d_loss}, g={g_loss}, inv={inv_loss}")]
    NonFinite {
        step: usize,
        d_loss: f64,
        g_loss: f64,
        inv_loss: f64,
    },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Idx(#[from] IdxError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// IDX container failures, one variant per corruption class so callers can
/// tell them apart.
#[derive(Debug, Error)]
pub enum IdxError {
    #[error("bad magic in {path}: expected {expected:#010x}, found {found:#010x}")]
    BadMagic {
        path: String,
        expected: u32,
        found: u32,
    },

    #[error("truncated file {path}: needed {needed} bytes, only {available} available")]
    Truncated {
        path: String,
        needed: usize,
        available: usize,
    },

    #[error("count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },
}
