use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by analytics, optimization and ingestion.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,

    #[error("empty verdict list")]
    EmptyVerdicts,

    #[error("insufficient sample: need at least 2 observations, got {0}")]
    InsufficientSample(usize),

    #[error("unknown revision {0:?}")]
    UnknownRevision(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("policy {policy:?} has no timeout value for test {test_id:?}")]
    MissingPolicyValue { policy: String, test_id: String },

    #[error("invalid workload spec: {0}")]
    InvalidSpec(String),

    #[error("malformed header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
