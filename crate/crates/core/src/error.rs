//! Error type shared by all simulator modules.

use std::path::PathBuf;

/// Errors surfaced by configuration validation, the codec, the stores and
/// trace ingestion. Simulation itself never fails per-request; every request
/// yields an outcome.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("{kind} id {id} out of range (must be < {max})")]
    IdOutOfRange {
        kind: &'static str,
        id: usize,
        max: usize,
    },

    #[error("insufficient blocks: need {need} distinct indices, got {got}")]
    InsufficientBlocks { need: usize, got: usize },

    #[error("blocks belong to different contents")]
    MixedContent,

    #[error("blocks have inconsistent payload lengths")]
    PayloadLengthMismatch,

    #[error("payload is empty")]
    EmptyPayload,

    #[error("AP {ap} is not attached to ES {es}")]
    ApNotAttached { ap: usize, es: usize },

    #[error("ES {es} has no private space (alpha = 0)")]
    NoPrivateSpace { es: usize },

    #[error("ES {es} has no public space (alpha = 1)")]
    NoPublicSpace { es: usize },

    #[error("trace line {line}: {msg}")]
    TraceParse { line: usize, msg: String },

    #[error("trace/topology mismatch: {0}")]
    IdMismatch(String),

    #[error("unknown policy {0:?} (expected DSPE, E, DSP or DCC)")]
    UnknownPolicy(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
