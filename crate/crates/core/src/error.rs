use thiserror::Error;

use crate::NodeId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("vector dimension must be positive")]
    ZeroDimension,

    #[error("dimension is unset (no vectors were read)")]
    DimensionUnset,

    #[error("angular distance is undefined for a zero vector")]
    ZeroVector,

    #[error("vector component {index} is not finite")]
    NonFinite { index: usize },

    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),

    #[error("node id {id} out of range for {len} nodes")]
    NodeOutOfRange { id: NodeId, len: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("graph is empty")]
    EmptyGraph,

    #[error("seed list is empty")]
    EmptySeeds,

    #[error("query batch is empty")]
    EmptyQueries,

    #[error("requested {requested} items but only {available} are available")]
    NotEnoughNodes { requested: usize, available: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("target precision {target} is unreachable (best {best} at epsilon {epsilon})")]
    PrecisionUnreachable { target: f64, best: f64, epsilon: f64 },

    #[error("malformed input: {0}")]
    Format(String),

    #[error("bad magic bytes in index file")]
    BadMagic,

    #[error("unsupported index format version {0}")]
    UnsupportedVersion(u16),

    #[error("unexpected end of file")]
    Truncated,

    #[error("adjacency checksum mismatch (stored {stored:08x}, computed {computed:08x})")]
    ChecksumMismatch { stored: u32, computed: u32 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by malformed or inconsistent input data.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::ZeroDimension
                | Error::DimensionUnset
                | Error::ZeroVector
                | Error::NonFinite { .. }
                | Error::Format(_)
                | Error::BadMagic
                | Error::UnsupportedVersion(_)
                | Error::Truncated
                | Error::ChecksumMismatch { .. }
                | Error::Io(_)
                | Error::EmptyDataset
                | Error::EmptyQueries
                | Error::InvalidParameter(_)
                | Error::NotEnoughNodes { .. }
        )
    }
}
