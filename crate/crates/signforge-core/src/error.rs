use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the generation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated an operation precondition (zero dimension, degenerate polygon, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A transform parameter fell outside its allowed range.
    #[error("parameter out of range: {0}")]
    Parameter(String),

    /// A sprite placement does not fit inside its target image.
    #[error("placement error: {0}")]
    Placement(String),

    /// Configuration is inconsistent or incomplete.
    #[error("configuration error: {0}")]
    Config(String),

    /// An input asset is missing, unreadable, or malformed.
    #[error("asset error: {0}")]
    Asset(String),

    /// COCO annotation document could not be parsed.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    /// A composite produced no visible sign pixels, so no label can be emitted.
    #[error("record {record_id}: variant is fully transparent, no bounding box")]
    NoBbox { record_id: u64 },

    /// Cutout extraction was asked to run on an empty mask.
    #[error("extraction error: {0}")]
    Extraction(String),

    /// A manifest line could not be decoded.
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },

    /// An image file could not be decoded.
    #[error("failed to decode image {path}: {message}")]
    Decode { path: PathBuf, message: String },

    /// Underlying I/O failure, annotated with the path involved.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input (config, assets, arguments)
    /// rather than runtime failures. The CLI maps these to exit code 1.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::NoBbox { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
