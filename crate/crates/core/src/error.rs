use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure category, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Io,
    Format,
    Invariant,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("embedding is not unit norm (norm = {norm})")]
    NotUnitNorm { norm: f64 },

    #[error("non-finite value at position {index}")]
    NonFinite { index: usize },

    #[error("not a probability vector (sum = {sum}, min = {min})")]
    NotSimplex { sum: f64, min: f64 },

    #[error("need at least as many class embeddings as classes (M = {m}, K = {k})")]
    TooFewEmbeddings { m: usize, k: usize },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid stream spec: field `{field}`: {reason}")]
    InvalidSpec { field: &'static str, reason: String },

    #[error("could not place {k} class means with separation {separation} after {attempts} attempts")]
    SeparationInfeasible { k: usize, separation: f64, attempts: usize },

    #[error("sample {index} is unlabeled; evaluation requires ground-truth labels")]
    Unlabeled { index: usize },

    #[error("sweep cell tau={tau} n1={n1} n2={n2}: {source}")]
    SweepCell { tau: f64, n1: u64, n2: u64, source: Box<Error> },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),

    #[error("truncated payload at byte offset {offset} (needed {needed} more bytes)")]
    Truncated { offset: u64, needed: u64 },

    #[error("non-finite float at byte offset {offset}")]
    NonFiniteFloat { offset: u64 },

    #[error("malformed file: {0}")]
    Malformed(String),

    #[error("state invariant violated: {0}")]
    InvariantViolation(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::BadMagic { .. }
            | Error::UnsupportedVersion(_)
            | Error::Truncated { .. }
            | Error::NonFiniteFloat { .. }
            | Error::Malformed(_) => ErrorKind::Format,
            Error::InvariantViolation(_) => ErrorKind::Invariant,
            Error::SweepCell { source, .. } => source.kind(),
            _ => ErrorKind::Validation,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
