//! Vertex-centric BSP engine, partitioned edge-list files and PageRank.
//!
//! The engine and PageRank are generic over [`Scalar`]; the `*64` aliases
//! below are what the command-line tools use.

pub mod bsp;
pub mod graph_io;
pub mod pagerank;
pub mod scalar;

pub use bsp::{
    run, run_edge_list, run_loaded, AggregatorSlot, EngineConfig, EngineError, LoadedGraph,
    MessageEnvelope, ProgramError, RunReport, SuperstepSummary, VertexContext, VertexProgram,
    VertexState,
};
pub use graph_io::{
    assign_worker, emit_edge_list, emit_partition, parse_partition, partition_file_name,
    partition_graph, EdgeList, FormatError, GraphPartition, VertexId,
};
pub use pagerank::{
    format_significant, power_iteration, rank, OracleResult, PageRankParams, PageRankProgram,
    RankTable,
};
pub use scalar::Scalar;

pub type VertexState64 = VertexState<f64>;
pub type MessageEnvelope64 = MessageEnvelope<f64>;
pub type RunReport64 = RunReport<f64>;
pub type LoadedGraph64 = LoadedGraph<f64>;
pub type PageRankParams64 = PageRankParams<f64>;
pub type PageRankProgram64 = PageRankProgram<f64>;
pub type RankTable64 = RankTable<f64>;

pub type PageRankParams32 = PageRankParams<f32>;
pub type PageRankProgram32 = PageRankProgram<f32>;
