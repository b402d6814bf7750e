//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by dataset construction, training, attacks and the
/// experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("label column {0:?} is not binary and no threshold rule was given")]
    NonBinaryLabel(String),

    #[error("insufficient records: {0}")]
    Insufficient(String),

    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("non-finite loss at epoch {epoch}: {detail}")]
    NonFiniteLoss { epoch: usize, detail: String },

    #[error("empty group: {0}")]
    EmptyGroup(String),

    #[error("group {group} has no records of true class {class}")]
    MissingClassInGroup { group: String, class: u8 },

    #[error("zero variance in {0}")]
    ZeroVariance(String),

    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
