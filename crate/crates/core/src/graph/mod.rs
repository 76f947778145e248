//! Dynamic graph and matching primitives shared by every other module.
//!
//! Vertices are dense integers fixed at construction. Removing a vertex
//! tombstones it and empties its adjacency; ids are never renumbered.

mod dyngraph;
mod matching;
mod stream;

pub use dyngraph::DynGraph;
pub use matching::Matching;
pub use stream::{parse_stream, write_stream, Stream};

use thiserror::Error;

pub type VertexId = usize;

/// Normalized undirected edge `(min, max)`.
pub type Edge = (VertexId, VertexId);

#[inline]
pub fn norm(u: VertexId, v: VertexId) -> Edge {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum UpdateKind {
    Insert,
    Delete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct UpdateEvent {
    pub kind: UpdateKind,
    pub u: VertexId,
    pub v: VertexId,
}

impl UpdateEvent {
    pub fn insert(u: VertexId, v: VertexId) -> Self {
        UpdateEvent { kind: UpdateKind::Insert, u, v }
    }

    pub fn delete(u: VertexId, v: VertexId) -> Self {
        UpdateEvent { kind: UpdateKind::Delete, u, v }
    }

    pub fn edge(&self) -> Edge {
        norm(self.u, self.v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoreError {
    #[error("edge ({0}, {1}) already present")]
    DuplicateEdge(VertexId, VertexId),
    #[error("edge ({0}, {1}) not present")]
    MissingEdge(VertexId, VertexId),
    #[error("self-loop on vertex {0}")]
    SelfLoop(VertexId),
    #[error("vertex {v} out of range for n = {n}")]
    VertexOutOfRange { v: VertexId, n: usize },
    #[error("vertex {0} has been removed")]
    Tombstoned(VertexId),
    #[error("rank {k} out of bounds for vertex {v} of degree {degree}")]
    RankOutOfBounds { v: VertexId, k: usize, degree: usize },
    #[error("path is not alternating at position {0}")]
    NotAlternating(usize),
    #[error("malformed stream at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
