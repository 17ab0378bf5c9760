//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

use crate::series::Split;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV at row {row}: {message}")]
    Csv { row: u64, message: String },

    #[error("column {0} not found")]
    MissingColumn(String),

    #[error("row {row}: cell {cell:?} is not a number")]
    NonNumeric { row: u64, cell: String },

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("cannot fit {kind} normalizer: {reason}")]
    DegenerateScale { kind: &'static str, reason: String },

    #[error("series of length {len} is too short, need at least {needed}")]
    SeriesTooShort { len: usize, needed: usize },

    #[error("invalid split fractions: {0}")]
    InvalidSplit(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("history has {got} values, lag depth {needed} requires at least that many")]
    InsufficientHistory { needed: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("the {0} split is empty")]
    EmptySplit(Split),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss is {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input (flags, configs, specs)
    /// as opposed to failures while running.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidSpec(_)
                | Error::InvalidSplit(_)
                | Error::Config(_)
                | Error::Json(_)
                | Error::MissingColumn(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
