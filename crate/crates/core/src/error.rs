use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("{op}: {msg}")]
    InvalidShape { op: &'static str, msg: String },

    #[error("{op}: index {index} out of range for extent {bound} (position {position})")]
    IndexOutOfRange {
        op: &'static str,
        position: usize,
        index: usize,
        bound: usize,
    },

    #[error("log of non-positive value {value} at position {position}")]
    Domain { position: usize, value: f64 },

    #[error("backward requires a scalar root, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),

    #[error("backward root does not require grad")]
    NoGradient,

    #[error("edge index: {0}")]
    EdgeIndex(String),

    #[error("claim `{claim}` rejected: violated at edge position {position}")]
    ClaimRejected { claim: &'static str, position: usize },

    #[error("segment index not sorted at position {0}")]
    UnsortedSegments(usize),

    #[error("aggregation `{0}` is forward-only")]
    NotDifferentiable(&'static str),

    #[error("aggregation: {0}")]
    Aggregation(String),

    #[error("message passing: {0}")]
    MessagePassing(String),

    #[error("an edge-level callback cannot run on the segment_fused path")]
    PathCallbackConflict,

    #[error("unknown node type `{0}`")]
    UnknownNodeType(String),

    #[error("unknown edge type `{0}`")]
    UnknownEdgeType(String),

    #[error("unknown attribute `{attr}` on node type `{node_type}`")]
    UnknownAttribute { node_type: String, attr: String },

    #[error("heterogeneous graph: {0}")]
    Hetero(String),

    #[error("graph is shared with live store adapters; mutation refused")]
    SharedGraph,

    #[error("dataset {path}: {msg}")]
    Dataset { path: PathBuf, msg: String },

    #[error("sampler: {0}")]
    Sampler(String),

    #[error("batch {index}: {source}")]
    Batch {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("explainer: {0}")]
    Explain(String),

    #[error("correctness gate: {layer} {mode} seed rows differ from baseline by {max_diff:e}")]
    CorrectnessGate { layer: String, mode: String, max_diff: f64 },

    #[error("training: {0}")]
    Train(String),

    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dataset(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Dataset {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
