use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("keystream too short: need {needed} bytes, have {available}")]
    KeystreamTooShort { needed: usize, available: usize },

    #[error("invalid key: {0}")]
    InvalidKey(String),

    #[error("architecture line {line}: {message} (at `{token}`)")]
    ArchParse {
        line: usize,
        token: String,
        message: String,
    },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("malformed model: {0}")]
    MalformedModel(String),

    #[error("truncated file")]
    Truncated,

    #[error("bad magic {found:02x?}, expected {expected:02x?}")]
    BadMagic { found: [u8; 4], expected: [u8; 4] },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),

    #[error("integrity digest mismatch")]
    DigestMismatch,

    #[error("malformed file: {0}")]
    MalformedFile(String),

    #[error("idx: bad magic bytes {0:02x?}")]
    IdxBadMagic([u8; 2]),

    #[error("idx: unsupported type code 0x{0:02x}")]
    IdxUnsupportedType(u8),

    #[error("idx: payload has {actual} bytes but header declares {declared}")]
    IdxSizeMismatch { declared: usize, actual: usize },

    #[error("idx: truncated file")]
    IdxTruncated,

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("fraction {0} out of range (0, 1]")]
    FractionOutOfRange(f64),

    #[error("empty logit vector")]
    EmptyLogits,

    #[error("unknown report format `{0}` (expected text, json or csv)")]
    UnknownFormat(String),

    #[error("{0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
