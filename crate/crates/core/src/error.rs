use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("client index {index} out of range for {n} clients")]
    ClientOutOfRange { index: usize, n: usize },

    #[error("client {0} has an empty shard")]
    EmptyShard(usize),

    #[error("bad IDX magic: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },

    #[error("truncated IDX payload: header promises {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },

    #[error("IDX payload has {0} trailing bytes")]
    TrailingBytes(usize),

    #[error("label {value} at position {index} is not a digit 0..9")]
    LabelOutOfRange { index: usize, value: u8 },

    #[error("cannot split {count} examples across {n} clients")]
    TooFewExamples { count: usize, n: usize },

    #[error("cannot sample {m} clients out of {n}")]
    TooManySampled { m: usize, n: usize },

    #[error("expected {expected} returned models, got {got}")]
    WrongCount { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("iterate became non-finite at round {0}")]
    NonFinite(usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(field: &str, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
