//! Partitioned edge-list text format and modulo partitioning.
//!
//! A partition file looks like
//!
//! ```text
//! 1010
//! 21037
//! 2 20
//! 6 3
//! ...
//! ```
//!
//! Line 1 is the number of vertices owned by the worker, line 2 the number
//! of out-edges whose source it owns, and every following line is one
//! `<source> <dest>` edge. Ownership is `id mod W`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

/// Vertex identifier.
pub type VertexId = u64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("line {line}: expected {what}, found {found:?}")]
    Parse {
        line: usize,
        what: &'static str,
        found: String,
    },
    #[error("line {line}: header declares {declared} edges but body has {actual}")]
    EdgeCountMismatch {
        line: usize,
        declared: u64,
        actual: u64,
    },
    #[error("line {line}: header declares {declared} owned vertices but body has {actual} distinct sources")]
    VertexCountTooSmall {
        line: usize,
        declared: u64,
        actual: u64,
    },
    #[error("line {line}: edge source {src} not owned by worker {worker_index} of {workers}")]
    Ownership {
        line: usize,
        src: VertexId,
        worker_index: usize,
        workers: usize,
    },
    #[error("line {line}: duplicate edge {src} {dest}")]
    DuplicateEdge {
        line: usize,
        src: VertexId,
        dest: VertexId,
    },
    #[error("line {line}: missing header")]
    MissingHeader { line: usize },
    #[error("worker index {worker_index} out of range for {workers} workers")]
    WorkerIndex { worker_index: usize, workers: usize },
}

/// One worker's share of the graph.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GraphPartition {
    pub worker_index: usize,
    /// Number of vertices owned by this worker, including owned vertices
    /// without out-edges.
    pub vertex_count: u64,
    /// Edges whose source is owned here, sorted by (source, dest).
    pub edges: Vec<(VertexId, VertexId)>,
}

impl GraphPartition {
    pub fn edge_count(&self) -> u64 {
        self.edges.len() as u64
    }

    /// Distinct source ids appearing in the body.
    pub fn sources(&self) -> BTreeSet<VertexId> {
        self.edges.iter().map(|&(s, _)| s).collect()
    }
}

/// Whole graph before partitioning.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EdgeList {
    pub vertex_ids: BTreeSet<VertexId>,
    pub edges: Vec<(VertexId, VertexId)>,
}

impl EdgeList {
    /// Builds an edge list whose vertex set is exactly the edge endpoints.
    pub fn from_edges(edges: impl IntoIterator<Item = (VertexId, VertexId)>) -> Self {
        let edges: Vec<_> = edges.into_iter().collect();
        let vertex_ids = edges.iter().flat_map(|&(s, d)| [s, d]).collect();
        EdgeList { vertex_ids, edges }
    }

    /// Edge list over vertices `0..n`.
    pub fn with_vertices(n: u64, edges: impl IntoIterator<Item = (VertexId, VertexId)>) -> Self {
        EdgeList {
            vertex_ids: (0..n).collect(),
            edges: edges.into_iter().collect(),
        }
    }

    /// First edge endpoint missing from `vertex_ids`, if any.
    pub fn first_unknown_endpoint(&self) -> Option<VertexId> {
        self.edges
            .iter()
            .flat_map(|&(s, d)| [s, d])
            .find(|v| !self.vertex_ids.contains(v))
    }

    /// Sorted, deduplicated copy of the edges.
    pub fn canonical_edges(&self) -> Vec<(VertexId, VertexId)> {
        let set: BTreeSet<_> = self.edges.iter().copied().collect();
        set.into_iter().collect()
    }
}

pub fn assign_worker(vertex_id: VertexId, workers: usize) -> usize {
    assert!(workers >= 1, "worker count must be at least 1");
    (vertex_id % workers as u64) as usize
}

/// Parses one partition file and validates its headers and ownership.
pub fn parse_partition(
    text: &str,
    worker_index: usize,
    workers: usize,
) -> Result<GraphPartition, FormatError> {
    if workers == 0 || worker_index >= workers {
        return Err(FormatError::WorkerIndex {
            worker_index,
            workers,
        });
    }
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let vertex_count = header(lines.next(), 1, "owned vertex count")?;
    let declared_edges = header(lines.next(), 2, "edge count")?;

    let mut edges = Vec::new();
    let mut seen = BTreeSet::new();
    let mut last_line = 2;
    for (line, raw) in lines {
        last_line = line;
        if raw.is_empty() {
            continue;
        }
        let mut tokens = raw.split(' ');
        let source = id_token(tokens.next(), line, raw)?;
        let dest = id_token(tokens.next(), line, raw)?;
        if tokens.next().is_some() {
            return Err(FormatError::Parse {
                line,
                what: "exactly two ids",
                found: raw.to_string(),
            });
        }
        if assign_worker(source, workers) != worker_index {
            return Err(FormatError::Ownership {
                line,
                src: source,
                worker_index,
                workers,
            });
        }
        if !seen.insert((source, dest)) {
            return Err(FormatError::DuplicateEdge {
                line,
                src: source,
                dest,
            });
        }
        edges.push((source, dest));
    }
    if edges.len() as u64 != declared_edges {
        return Err(FormatError::EdgeCountMismatch {
            line: last_line,
            declared: declared_edges,
            actual: edges.len() as u64,
        });
    }
    let sources = edges.iter().map(|&(s, _)| s).collect::<BTreeSet<_>>().len() as u64;
    if sources > vertex_count {
        return Err(FormatError::VertexCountTooSmall {
            line: 1,
            declared: vertex_count,
            actual: sources,
        });
    }
    edges.sort_unstable();
    Ok(GraphPartition {
        worker_index,
        vertex_count,
        edges,
    })
}

fn header(line: Option<(usize, &str)>, number: usize, what: &'static str) -> Result<u64, FormatError> {
    let (line, raw) = line.ok_or(FormatError::MissingHeader { line: number })?;
    raw.parse().map_err(|_| FormatError::Parse {
        line,
        what,
        found: raw.to_string(),
    })
}

fn id_token(token: Option<&str>, line: usize, raw: &str) -> Result<VertexId, FormatError> {
    token
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| FormatError::Parse {
            line,
            what: "decimal vertex id",
            found: raw.to_string(),
        })
}

pub fn emit_partition(p: &GraphPartition) -> String {
    let mut out = String::with_capacity(16 + p.edges.len() * 12);
    let _ = writeln!(out, "{}", p.vertex_count);
    let _ = writeln!(out, "{}", p.edges.len());
    for (s, d) in &p.edges {
        let _ = writeln!(out, "{s} {d}");
    }
    out
}

/// Splits a graph into `workers` partitions by `source mod workers`.
///
/// Every vertex in `g.vertex_ids` is counted by exactly one partition,
/// including sinks and isolated vertices.
pub fn partition_graph(g: &EdgeList, workers: usize) -> Vec<GraphPartition> {
    assert!(workers >= 1, "worker count must be at least 1");
    let mut parts: Vec<GraphPartition> = (0..workers)
        .map(|worker_index| GraphPartition {
            worker_index,
            ..Default::default()
        })
        .collect();
    for &v in &g.vertex_ids {
        parts[assign_worker(v, workers)].vertex_count += 1;
    }
    for (s, d) in g.canonical_edges() {
        parts[assign_worker(s, workers)].edges.push((s, d));
    }
    parts
}

/// File name of worker `worker_index`'s partition: `<base>_<index+1>`.
pub fn partition_file_name(base: &str, worker_index: usize) -> String {
    format!("{base}_{}", worker_index + 1)
}

/// Whole-graph text: the partition grammar with a single worker.
pub fn emit_edge_list(g: &EdgeList) -> String {
    let mut parts = partition_graph(g, 1);
    emit_partition(&parts.remove(0))
}
