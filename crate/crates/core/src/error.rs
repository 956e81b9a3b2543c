//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("edge ({u}, {v}) references a node outside 0..{n}")]
    EdgeOutOfRange { u: u32, v: u32, n: usize },
    #[error("node id {node} is outside 0..{n}")]
    NodeOutOfRange { node: u32, n: usize },
    #[error("edge probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("anchor set is not {k}-dominating: node {witness} is uncovered")]
    NotDominating { k: u32, witness: u32 },
    #[error("encoding must distinguish neighbors (SPD bucket 1) for this construction")]
    NotNeighborDistinguishable,
    #[error("encoding must distinguish out-of-ball anchors for k = {k}")]
    NotAnchorDistinguishable { k: u32 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
