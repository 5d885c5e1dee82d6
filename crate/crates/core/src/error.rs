use thiserror::Error;

use crate::graph::VertexId;

/// Structural problems with a rotation system.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("vertex {0} is out of range for a graph with {1} vertices")]
    VertexOutOfRange(VertexId, usize),
    #[error("self-loop at vertex {0}")]
    SelfLoop(VertexId),
    #[error("parallel edge between {0} and {1}")]
    ParallelEdge(VertexId, VertexId),
    #[error("asymmetric rotation: {1} lists {0} as a neighbor but {0} does not list {1}")]
    Asymmetric(VertexId, VertexId),
    #[error("vertex {vertex} has degree {degree}, above the cap of {cap}")]
    DegreeCap {
        vertex: VertexId,
        degree: usize,
        cap: usize,
    },
    #[error("vertex {0} has invalid coordinates ({1}, {2})")]
    BadCoordinate(VertexId, f64, f64),
    #[error("{1} is not adjacent to {0}")]
    NotAdjacent(VertexId, VertexId),
    #[error("coordinate table has {got} entries, expected {expected}")]
    CoordinateCount { got: usize, expected: usize },
}

/// Errors raised while reading graph, segment, matching or truth files.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: vertex {id} is not declared (graph has {count} vertices)")]
    UndeclaredVertex { line: usize, id: u64, count: usize },
    #[error("line {line}: vertex {id} declared twice")]
    DuplicateVertex { line: usize, id: u64 },
    #[error("segment {0} has identical endpoints")]
    ZeroLengthSegment(usize),
    #[error("segment {index} duplicates an earlier road between the same endpoints")]
    DuplicateSegment { index: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Crate-wide error. The variants fall into three classes that the CLI maps to
/// exit codes: input problems, configuration problems, and internal faults.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(
        "label {label} has product {product}, above the bound {bound}; \
         raise k (see `tune-k`) or raise --max-product"
    )]
    ProductBound {
        label: String,
        product: u64,
        bound: u64,
    },
    #[error("key {key} outside universe [1, {max}]")]
    KeyOutOfUniverse { key: u64, max: u64 },
    #[error("{what} exceeds the size cap of {cap}")]
    SizeCap { what: String, cap: usize },
    #[error("metric undefined: {0}")]
    Undefined(&'static str),
    #[error("generation failed: {0}")]
    Generation(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn is_config(&self) -> bool {
        matches!(self, Error::ProductBound { .. } | Error::SizeCap { .. })
    }

    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Internal(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
