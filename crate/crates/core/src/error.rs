use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    Shape(String),

    #[error("non-finite entry at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("zero-norm vector at index {0}")]
    ZeroNorm(usize),

    #[error("sample {0} has no positive affinity (isolated row)")]
    IsolatedRow(usize),

    #[error("label length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("bad magic in {path}: expected \"DCLU\"")]
    BadMagic { path: PathBuf },

    #[error("unsupported format version {version} in {path}")]
    VersionMismatch { path: PathBuf, version: u16 },

    #[error("unknown dtype code {code} in {path}")]
    UnknownDtype { path: PathBuf, code: u8 },

    #[error("truncated payload in {path}: expected {expected} bytes, found {found}")]
    TruncatedPayload {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error("trailing bytes in {path}: expected {expected} payload bytes, found {found}")]
    TrailingBytes {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error("non-finite value in {path} at row {row}, column {col}")]
    NonFiniteValue { path: PathBuf, row: u64, col: u64 },

    #[error("bad label in {path} at line {line}: {text:?}")]
    BadLabel {
        path: PathBuf,
        line: usize,
        text: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Wraps `self` with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
