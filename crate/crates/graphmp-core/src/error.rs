//! Crate-wide error type.
//!
//! Read paths report distinct kinds for each failure mode (missing file, bad
//! magic, unsupported version, checksum mismatch, truncation, invariant
//! violation) so callers can map them to stable exit codes.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty graph")]
    EmptyGraph,

    #[error("vertex id {id} out of range (num_vertices = {num_vertices})")]
    VertexOutOfRange { id: u64, num_vertices: u64 },

    #[error("unowned destination {dst}: no shard interval covers it")]
    UnownedDestination { dst: u64 },

    #[error("{path}:{line}: malformed edge line: {detail}")]
    ParseLine {
        path: PathBuf,
        line: u64,
        detail: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: bad magic (expected {expected:?})")]
    BadMagic { path: PathBuf, expected: [u8; 4] },

    #[error("{path}: unsupported format version {found}")]
    UnsupportedVersion { path: PathBuf, found: u16 },

    #[error("{path}: checksum mismatch (stored {stored:#018x}, computed {computed:#018x})")]
    ChecksumMismatch {
        path: PathBuf,
        stored: u64,
        computed: u64,
    },

    #[error("{path}: unexpected end of file")]
    UnexpectedEof { path: PathBuf },

    #[error("{path}: format violation: {detail}")]
    FormatViolation { path: PathBuf, detail: String },

    #[error("metadata not found in {dir}")]
    MetadataNotFound { dir: PathBuf },

    #[error("vertex program failed at vertex {vertex}: {detail}")]
    Program { vertex: u64, detail: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("internal invariant violation: {0}")]
    InvariantViolation(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
