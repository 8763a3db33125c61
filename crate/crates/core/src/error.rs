use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("not a RIFF/WAVE file: {0}")]
    NotWav(String),
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("truncated file: {0}")]
    Truncated(String),
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
    #[error("invalid audio clip: {0}")]
    InvalidClip(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("too few frames for normalization: got {0}, need at least 2")]
    TooFewFrames(usize),
    #[error("invalid filterbank geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("speaker id already enrolled: {0}")]
    DuplicateId(String),
    #[error("invalid speaker id {0:?}: must be non-empty without whitespace")]
    InvalidId(String),
    #[error("malformed database (line {line}): {reason}")]
    Format { line: usize, reason: String },
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
}
