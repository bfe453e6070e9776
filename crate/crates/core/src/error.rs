use thiserror::Error;

use crate::graph::NodeId;

/// Errors surfaced by the routing core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("at least two layers required, got {0}")]
    AtLeastTwoLayers(usize),

    #[error("at least one node per layer required")]
    EmptyLayer,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("duplicate node {0}")]
    DuplicateNode(NodeId),

    #[error("node {node}: incomplete ability map, missing task {task:?}")]
    IncompleteAbility { node: NodeId, task: String },

    #[error("node {0} out of range for graph")]
    UnknownNode(NodeId),

    #[error("node {0} has no successor layer")]
    NoSuccessorLayer(NodeId),

    #[error("negative telemetry value {value} for {field}")]
    NegativeTelemetry { field: &'static str, value: f64 },

    #[error("no feasible successor into layer {0}: every node unavailable")]
    NoFeasibleSuccessor(usize),

    #[error("invalid weight vector: {0}")]
    InvalidWeights(String),

    #[error("task set mismatch: {0}")]
    TaskSetMismatch(String),

    #[error("infinite divergence: predicted mass is zero where target mass is positive (index {0})")]
    InfiniteDivergence(usize),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("empty normalization window")]
    EmptyWindow,

    #[error("invalid quantile pair ({0}, {1})")]
    InvalidQuantiles(f64, f64),

    #[error("pheromone shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty candidate set")]
    EmptyAllowed,

    #[error("search space too large: {paths} paths exceeds limit {limit}")]
    SearchSpaceTooLarge { paths: u64, limit: u64 },

    #[error("snapshot does not match graph: {0}")]
    SnapshotMismatch(String),

    #[error("invalid route path: {0}")]
    InvalidPath(String),

    #[error("incomplete trace: expected {expected} stage records, got {got}")]
    IncompleteTrace { expected: usize, got: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
