//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite input in {0}")]
    NonFinite(&'static str),

    #[error("degree distributions cannot be balanced: {0}")]
    DegreeBalance(String),

    #[error("code construction failed: {0}")]
    Construction(String),

    /// The pipeline decoder has not yet accumulated one full block of delay.
    #[error("no output yet: decoder needs one more block to fill the delay line")]
    NoOutputYet,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
