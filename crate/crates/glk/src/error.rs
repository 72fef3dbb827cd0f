//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed PGM input. `offset` is the byte position of the offending token.
    #[error("pgm parse error at byte {offset}: {message}")]
    PgmParse { offset: usize, message: String },

    /// A value fell outside the range a format or contract allows.
    #[error("value {value} out of range: {context}")]
    Range { value: u64, context: String },

    /// Lookup of an instance id that is not present in the label map.
    #[error("instance id {id} not found in label map")]
    InstanceNotFound { id: u32 },

    /// An operation that requires a non-empty pixel set received an empty one.
    #[error("empty instance: {0}")]
    EmptyInstance(String),

    /// Invalid configuration or parameter combination.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Matrix/tensor dimensions do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Paired inputs (e.g. prediction and ground truth) have different dimensions.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A dataset that cannot support the requested operation
    /// (e.g. no image contains two instances to separate).
    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),

    /// A metric whose value is mathematically undefined for the given inputs.
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    /// Procedural generation could not satisfy its constraints.
    #[error("generation failed: {0}")]
    Generation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Json { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
