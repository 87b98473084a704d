use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("embedding provider failed for context position {position}: {source}")]
    Provider {
        position: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("text not present in embedding file: {0:?}")]
    MissingText(String),

    #[error("duplicate text in embedding file: {0:?}")]
    DuplicateText(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("game too large for exhaustive enumeration: {players} players (max {max})")]
    TooLarge { players: usize, max: usize },

    #[error("index {index} out of bounds (len {len})")]
    IndexOutOfBounds { index: usize, len: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(&'static str),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
