//! Road-network evolution by topological conformal matching.
//!
//! Two snapshots of a road network are given as embedded graphs (vertices with
//! a clockwise rotation of neighbors). Vertices receive quasi-unique labels
//! from a canonical breadth-first search; labels shared by few vertices seed
//! greedy floods that grow a conformal partial map between the snapshots.
//! Whatever stays unmatched is the difference between them.

pub mod error;
pub mod generator;
pub mod graph;
pub mod ingest;
pub mod labeling;
pub mod matcher;
pub mod metrics;
pub mod oracle;
pub mod seed_index;
pub mod veb;

pub use error::{Error, GraphError, IngestError, Result};
pub use graph::{
    verify_conformal, ConformalMap, EmbeddedGraph, GraphOptions, LonLat, Side, VertexId, Violation,
    DEFAULT_MAX_DEGREE,
};
pub use labeling::{label_nodes, Label, Labeling, MasterTable, DEFAULT_K};
pub use matcher::{match_auto_k, match_graphs, MatchConfig, MatchOutcome, MatchSession};
pub use seed_index::{auto_tune_k, SeedIndex, TuneResult, DEFAULT_MAX_PRODUCT};
pub use veb::VebTree;
