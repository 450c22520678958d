use std::io;

use thiserror::Error;

/// Error type shared by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry mismatch: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    GeometryMismatch {
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },

    #[error("timestamp went backwards: {prev} us followed by {next} us")]
    NonMonotonicTimestamp { prev: u64, next: u64 },

    #[error("kernel {kw}x{kh} does not fit inside a {w}x{h} input")]
    KernelTooLarge { kw: usize, kh: usize, w: usize, h: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("malformed input: {0}")]
    Format(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
