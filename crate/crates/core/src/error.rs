//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

/// Errors raised by dataset ingestion, discovery, transforms, and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}, field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no observations")]
    NoObservations,

    #[error("no valid pixels")]
    NoValidPixels,

    #[error("insufficient samples: need more than {needed}, have {have}")]
    InsufficientSamples { needed: usize, have: usize },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("train/test leakage: unit ({lake_id}, {year}) present in both sets")]
    Leakage { lake_id: String, year: i32 },

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(line: usize, field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse { line, field: field.into(), message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
