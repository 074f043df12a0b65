use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node {node} out of range for a graph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("self-loop on node {0} is not allowed")]
    SelfLoop(usize),

    #[error("attribute `{name}` has {len} values but the graph has {n} nodes")]
    AttributeLength { name: String, len: usize, n: usize },

    #[error("unknown node label `{0}`")]
    UnknownLabel(String),

    #[error("graph has no attribute `{0}`")]
    UnknownAttribute(String),

    #[error("attribute `{attribute}` has no node with level `{level}`")]
    UnknownLevel { attribute: String, level: String },

    #[error("cannot parse statistic `{0}`")]
    BadStatistic(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("{0} dyads is too many for exhaustive enumeration (limit 20)")]
    EnumerationTooLarge(usize),

    #[error("degenerate covariance: factorization failed after jitter retries")]
    DegenerateCovariance,

    #[error("sequence has zero variance")]
    ZeroVariance,

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("wall time must be positive, got {0}")]
    NonPositiveTime(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code: 1 usage/config, 2 data, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::BadStatistic(_) | Error::Json(_) | Error::Dimension { .. } => 1,
            Error::NodeOutOfRange { .. }
            | Error::SelfLoop(_)
            | Error::AttributeLength { .. }
            | Error::UnknownLabel(_)
            | Error::UnknownAttribute(_)
            | Error::UnknownLevel { .. }
            | Error::Parse { .. }
            | Error::Io { .. }
            | Error::EnumerationTooLarge(_) => 2,
            Error::NotPositiveDefinite
            | Error::DegenerateCovariance
            | Error::ZeroVariance
            | Error::TooFewSamples { .. }
            | Error::NonPositiveTime(_) => 3,
        }
    }
}
