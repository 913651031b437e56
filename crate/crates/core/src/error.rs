//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header: {0}")]
    Header(String),

    #[error("missing mandatory field: {0}")]
    MissingField(&'static str),

    #[error("unknown {kind} id '{id}' referenced by {referrer}")]
    DanglingRef {
        kind: &'static str,
        id: String,
        referrer: String,
    },

    #[error("invalid dtype '{0}'")]
    BadDtype(String),

    #[error("invalid duration '{0}'")]
    BadDuration(String),

    #[error("invalid date '{0}'")]
    BadDate(String),

    #[error("invalid file path '{path}': {reason}")]
    BadPath { path: String, reason: &'static str },

    #[error("scheme violation in table '{table}', column '{column}', row {row}: {violation}")]
    SchemeViolation {
        table: String,
        column: String,
        row: usize,
        violation: String,
    },

    #[error("duplicate index row '{0}'")]
    DuplicateRow(String),

    #[error("malformed table csv: {0}")]
    TableCsv(String),

    #[error("malformed dependency table: {0}")]
    DepsCsv(String),

    #[error("invalid table query: {0}")]
    TableQuery(String),

    #[error("backend kind '{0}' already registered")]
    DuplicateBackend(String),

    #[error("unknown backend kind '{0}'")]
    UnknownBackend(String),

    #[error("invalid repository: {0}")]
    BadRepository(String),

    #[error("backend is offline")]
    Offline,

    #[error("not found: {0}")]
    NotFound(String),

    #[error("dataset '{0}' not found in any configured repository")]
    DatasetNotFound(String),

    #[error("version '{version}' of '{name}' already published")]
    VersionExists { name: String, version: String },

    #[error("missing referenced media '{0}'")]
    MissingMedia(String),

    #[error("unexpected file in dataset root: {0}")]
    UnexpectedFile(String),

    #[error("digest mismatch for '{path}': expected {expected}, got {actual}")]
    DigestMismatch {
        path: String,
        expected: String,
        actual: String,
    },

    #[error("zip archive error: {0}")]
    Zip(String),

    #[error("unsafe zip entry '{0}'")]
    UnsafeZipEntry(String),

    #[error("not a wav file: {0}")]
    NotAWav(String),

    #[error("unsupported wav encoding: {0}")]
    UnsupportedWav(String),

    #[error("invalid flavour: {0}")]
    BadFlavour(String),

    #[error("channel index {index} out of range for {channels} channel(s)")]
    ChannelOutOfRange { index: usize, channels: usize },

    #[error("timed out waiting for lock on {0}")]
    LockTimeout(String),

    #[error("publish already in progress for '{0}'")]
    PublishLocked(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no repositories configured")]
    NoRepositories,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
