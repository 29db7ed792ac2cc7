use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid dimensions must be positive, got {height}x{width}")]
    EmptyGrid { height: usize, width: usize },

    #[error("pixel ({row}, {col}) outside {height}x{width} grid")]
    PixelOutOfRange {
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    },

    #[error("index {index} out of range for bit vector of length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected_height}x{expected_width}, got {height}x{width}")]
    DimensionMismatch {
        expected_height: usize,
        expected_width: usize,
        height: usize,
        width: usize,
    },

    #[error("bit vector of length {len} cannot fill a {height}x{width} grid")]
    LengthMismatch {
        len: usize,
        height: usize,
        width: usize,
    },

    #[error("sequence has no frames")]
    EmptySequence,

    #[error("corpus has no frames")]
    EmptyCorpus,

    #[error("vocabulary too small: {required} token ids needed (2 x S_L = 2 x {pixels}), vocabulary size is {vocab_size}")]
    VocabularyTooSmall {
        pixels: usize,
        vocab_size: usize,
        required: usize,
    },

    #[error("invalid frequency floor {0}; expected 0 < f_min <= 1")]
    InvalidFrequencyFloor(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed {format} at byte {offset}: {message}")]
    Malformed {
        format: &'static str,
        offset: usize,
        message: String,
    },

    #[error("truncated {format}: expected {expected} {unit}, found {actual}")]
    Truncated {
        format: &'static str,
        unit: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("{path}: {source}")]
    AtPath {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("unsatisfiable walker config: {0}")]
    UnsatisfiableWalker(String),

    #[error("malformed vocabulary file: {0}")]
    VocabularyFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_path(self, path: impl Into<PathBuf>) -> Self {
        Error::AtPath {
            path: path.into(),
            source: Box::new(self),
        }
    }

    /// True when the failure came from the filesystem rather than from
    /// invalid content.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) => true,
            Error::AtPath { source, .. } => source.is_io(),
            _ => false,
        }
    }
}
