//! Approximate k-nearest-neighbor search on degree-adjusted neighborhood
//! graphs.
//!
//! A graph is built incrementally (ANNG), truncated to an approximate k-NN
//! graph, reshaped by static degree adjustment and path adjustment, and
//! searched best-first from vp-tree seeds with an optional epsilon-dependent
//! edge limit. The [`optimizer`] picks the expected degrees by hill climbing
//! on the mean log distance-computation count over a precision range.

pub mod bench;
pub mod construction;
pub mod dataset;
pub mod error;
pub mod graph;
pub mod index;
pub mod optimizer;
pub mod search;
pub mod vecs;
pub mod visited;
pub mod vptree;

/// Dense node identifier, `0..n`.
pub type NodeId = u32;

pub use construction::{
    adjust_path, construct_adjusted_graph, construct_adjusted_graph_with_constraint, construct_anng,
    construct_graph, has_path, ConstructionParams, Pipeline,
};
pub use dataset::{Dataset, Metric};
pub use error::{Error, Result};
pub use graph::{Edge, Graph, GraphStats};
pub use search::{
    effective_edge_limit, knn_search, seeds_random, DynamicDegree, EdgeLimit, Hit, SearchConfig,
    SearchParams, SearchResult, Searcher, Seeding,
};
pub use visited::{hash_size, VisitedSet};
pub use vptree::VpTree;
