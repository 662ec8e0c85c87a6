//! Round-accurate CONGEST-model simulation plus fault-tolerant distance
//! preserver constructions: single- and dual-failure multi-source FT-BFS
//! structures and +2 fault-tolerant additive spanners, with brute-force
//! verification oracles for desk-scale graphs.

pub mod centralized;
pub mod dual;
pub mod ftmbfs;
pub mod gen;
pub mod graph;
pub mod lca;
pub mod oracle;
pub mod preserver;
pub mod sim;
pub mod spanner;

pub use graph::{
    bfs_consistent, dist_edge_vertex, last_edge, replacement_path, sample, suffix, EdgeId,
    FaultSet, Graph, Path, PathSuffix, ShortestPathTree, VertexId,
};
pub use preserver::{PreserverSubgraph, Rule};
