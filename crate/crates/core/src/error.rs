use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("invalid mixture state: {0}")]
    InvalidState(String),

    #[error("invalid move: {0}")]
    InvalidMove(String),

    #[error("data must contain at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("data are constant; the observed range has zero length")]
    ConstantData,

    #[error("non-finite value at row {row}: {value}")]
    NonFinite { row: usize, value: String },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("degenerate chains: within-chain variance is zero")]
    DegenerateChains,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("column `{column}` not found in {path}")]
    MissingColumn { column: String, path: PathBuf },

    #[error("cannot parse `{cell}` at row {row} of {path}")]
    Parse {
        path: PathBuf,
        row: usize,
        cell: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
