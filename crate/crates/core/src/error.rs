use std::path::PathBuf;

/// Errors produced by the alignment toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty graph")]
    EmptyGraph,

    #[error("empty label in triple {0}")]
    EmptyLabel(usize),

    #[error("entity id {id} out of range (graph has {len} entities)")]
    EntityOutOfRange { id: usize, len: usize },

    #[error("invalid part count k={k} for {n} entities")]
    InvalidPartCount { k: usize, n: usize },

    #[error("invalid overlap degree d_ov={d_ov} for {k} batches")]
    InvalidOverlap { d_ov: usize, k: usize },

    #[error("no pairs")]
    NoPairs,

    #[error("no pseudo seeds")]
    NoPseudoSeeds,

    #[error("seed alignment is not 1-to-1: {0}")]
    NotOneToOne(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("id-space mismatch: {0}")]
    IdSpaceMismatch(String),

    #[error("batch too small for negative sampling: {0}")]
    BatchTooSmall(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Wraps an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
