//! Vertex-centric bulk synchronous parallel engine.
//!
//! A run is a sequence of supersteps. In each superstep every active vertex
//! (and every halted vertex that has mail) runs the vertex program once.
//! Messages sent during superstep `s` are delivered at `s + 1`, and
//! aggregator contributions made during `s` become readable as globals at
//! `s + 1`. The run ends at the first barrier where every vertex has voted
//! to halt and no messages are in flight, or when the superstep cap is hit.
//!
//! Results do not depend on the number of workers: each vertex's inbox is
//! sorted by source id, and aggregator contributions are folded in
//! ascending vertex-id order.

use std::collections::BTreeMap;
use std::thread;

use thiserror::Error;

use crate::graph_io::{assign_worker, EdgeList, GraphPartition, VertexId};
use crate::scalar::Scalar;

pub const DEFAULT_MAX_SUPERSTEPS: u64 = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct VertexState<S> {
    pub id: VertexId,
    pub value: S,
    /// Distinct destination ids, ascending.
    pub out_edges: Vec<VertexId>,
    pub active: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MessageEnvelope<S> {
    pub dest: VertexId,
    pub source: VertexId,
    pub payload: S,
}

/// Sum aggregator state as seen at a barrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregatorSlot<S> {
    pub index: usize,
    /// Sum of the contributions made during the superstep just finished.
    pub accumulated: S,
    /// Value readable through [`VertexContext::get_aggr_global`] during the
    /// superstep just finished.
    pub global: S,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineConfig {
    pub worker_count: usize,
    pub max_supersteps: u64,
    /// Always honoured; kept so callers can state the requirement.
    pub deterministic: bool,
    pub aggregator_slots: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            worker_count: 1,
            max_supersteps: DEFAULT_MAX_SUPERSTEPS,
            deterministic: true,
            aggregator_slots: 1,
        }
    }
}

impl EngineConfig {
    pub fn with_workers(worker_count: usize) -> Self {
        EngineConfig {
            worker_count,
            ..Default::default()
        }
    }

    pub fn max_supersteps(mut self, max: u64) -> Self {
        self.max_supersteps = max;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport<S> {
    pub supersteps_executed: u64,
    pub final_values: BTreeMap<VertexId, S>,
    /// False when the superstep cap stopped the run.
    pub halted_naturally: bool,
    pub messages_sent: u64,
    pub messages_delivered: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ProgramError {
    #[error("aggregator slot {slot} does not exist ({slots} configured)")]
    UnknownAggregator { slot: usize, slots: usize },
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{partitions} partitions supplied for {workers} workers")]
    PartitionCount { partitions: usize, workers: usize },
    #[error("edge references nonexistent vertex {0}")]
    UnknownVertex(VertexId),
    #[error("vertex {id} is referenced by an edge but partition {worker_index} does not declare it")]
    UndeclaredVertex { id: VertexId, worker_index: usize },
    #[error("partition at position {position} claims worker index {worker_index}")]
    PartitionOrder { position: usize, worker_index: usize },
    #[error("edge source {src} is not owned by partition {worker_index}")]
    UnownedSource { src: VertexId, worker_index: usize },
    #[error("vertex {src} sent a message to nonexistent vertex {dest}")]
    UnknownDestination { src: VertexId, dest: VertexId },
    #[error("vertex {vertex} failed in superstep {superstep}: {error}")]
    Program {
        vertex: VertexId,
        superstep: u64,
        error: ProgramError,
    },
}

/// User computation run once per active vertex per superstep.
pub trait VertexProgram<S: Scalar>: Sync {
    /// `messages` are the envelopes sent to this vertex during the previous
    /// superstep, sorted by source id.
    fn compute(
        &self,
        ctx: &mut VertexContext<'_, S>,
        messages: &[MessageEnvelope<S>],
    ) -> Result<(), ProgramError>;
}

impl<S, F> VertexProgram<S> for F
where
    S: Scalar,
    F: Fn(&mut VertexContext<'_, S>, &[MessageEnvelope<S>]) -> Result<(), ProgramError> + Sync,
{
    fn compute(
        &self,
        ctx: &mut VertexContext<'_, S>,
        messages: &[MessageEnvelope<S>],
    ) -> Result<(), ProgramError> {
        self(ctx, messages)
    }
}

/// A vertex's view of the engine during one compute call.
pub struct VertexContext<'a, S> {
    vertex: &'a mut VertexState<S>,
    superstep: u64,
    globals: &'a [S],
    outbox: &'a mut Vec<MessageEnvelope<S>>,
    contributions: &'a mut Vec<Contribution<S>>,
}

impl<S: Scalar> VertexContext<'_, S> {
    pub fn id(&self) -> VertexId {
        self.vertex.id
    }

    /// Zero-based index of the running superstep.
    pub fn superstep_index(&self) -> u64 {
        self.superstep
    }

    pub fn value(&self) -> S {
        self.vertex.value
    }

    pub fn set_value(&mut self, value: S) {
        self.vertex.value = value;
    }

    pub fn value_mut(&mut self) -> &mut S {
        &mut self.vertex.value
    }

    pub fn out_edges(&self) -> &[VertexId] {
        &self.vertex.out_edges
    }

    pub fn out_degree(&self) -> usize {
        self.vertex.out_edges.len()
    }

    /// One envelope per out-edge; nothing for a vertex without out-edges.
    pub fn send_message_to_all_neighbors(&mut self, payload: S) {
        let source = self.vertex.id;
        self.outbox
            .extend(self.vertex.out_edges.iter().map(|&dest| MessageEnvelope {
                dest,
                source,
                payload,
            }));
    }

    /// Sends to an arbitrary vertex. An unknown `dest` fails the run at the
    /// next barrier.
    pub fn send_message(&mut self, dest: VertexId, payload: S) {
        self.outbox.push(MessageEnvelope {
            dest,
            source: self.vertex.id,
            payload,
        });
    }

    pub fn vote_to_halt(&mut self) {
        self.vertex.active = false;
    }

    pub fn accumulate_aggr(&mut self, slot: usize, value: S) -> Result<(), ProgramError> {
        self.check_slot(slot)?;
        self.contributions.push(Contribution {
            vertex: self.vertex.id,
            slot,
            value,
        });
        Ok(())
    }

    /// Sum of slot contributions from the previous superstep.
    pub fn get_aggr_global(&self, slot: usize) -> Result<S, ProgramError> {
        self.check_slot(slot)?;
        Ok(self.globals[slot])
    }

    fn check_slot(&self, slot: usize) -> Result<(), ProgramError> {
        if slot < self.globals.len() {
            Ok(())
        } else {
            Err(ProgramError::UnknownAggregator {
                slot,
                slots: self.globals.len(),
            })
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Contribution<S> {
    vertex: VertexId,
    slot: usize,
    value: S,
}

/// Graph loaded into per-worker vertex tables.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedGraph<S> {
    /// `workers[w]` holds the vertices with `id mod W == w`, ascending by id.
    workers: Vec<Vec<VertexState<S>>>,
}

impl<S: Scalar> LoadedGraph<S> {
    /// Loads partition files. Vertices that only appear as edge targets are
    /// materialized on their owning worker, which must have declared room
    /// for them in its vertex count.
    pub fn from_partitions(partitions: &[GraphPartition], workers: usize) -> Result<Self, EngineError> {
        if workers == 0 {
            return Err(EngineError::Config("worker_count must be at least 1".into()));
        }
        if partitions.len() != workers {
            return Err(EngineError::PartitionCount {
                partitions: partitions.len(),
                workers,
            });
        }
        let mut tables: Vec<BTreeMap<VertexId, Vec<VertexId>>> = vec![BTreeMap::new(); workers];
        for (position, part) in partitions.iter().enumerate() {
            if part.worker_index != position {
                return Err(EngineError::PartitionOrder {
                    position,
                    worker_index: part.worker_index,
                });
            }
            for &(source, dest) in &part.edges {
                if assign_worker(source, workers) != position {
                    return Err(EngineError::UnownedSource {
                        src: source,
                        worker_index: position,
                    });
                }
                tables[position].entry(source).or_default().push(dest);
            }
        }
        let mut sinks: Vec<Vec<VertexId>> = vec![Vec::new(); workers];
        for part in partitions {
            for &(_, dest) in &part.edges {
                let owner = assign_worker(dest, workers);
                if let std::collections::btree_map::Entry::Vacant(slot) = tables[owner].entry(dest) {
                    slot.insert(Vec::new());
                    sinks[owner].push(dest);
                }
            }
        }
        for (w, part) in partitions.iter().enumerate() {
            if tables[w].len() as u64 > part.vertex_count {
                let id = sinks[w].iter().copied().min().unwrap_or_else(|| {
                    *tables[w].keys().next_back().expect("non-empty table")
                });
                return Err(EngineError::UndeclaredVertex { id, worker_index: w });
            }
        }
        Ok(Self::from_tables(tables))
    }

    /// Loads an in-memory graph, keeping isolated vertices.
    pub fn from_edge_list(g: &EdgeList, workers: usize) -> Result<Self, EngineError> {
        if workers == 0 {
            return Err(EngineError::Config("worker_count must be at least 1".into()));
        }
        if let Some(id) = g.first_unknown_endpoint() {
            return Err(EngineError::UnknownVertex(id));
        }
        let mut tables: Vec<BTreeMap<VertexId, Vec<VertexId>>> = vec![BTreeMap::new(); workers];
        for &v in &g.vertex_ids {
            tables[assign_worker(v, workers)].insert(v, Vec::new());
        }
        for (s, d) in g.canonical_edges() {
            tables[assign_worker(s, workers)]
                .get_mut(&s)
                .expect("source present")
                .push(d);
        }
        Ok(Self::from_tables(tables))
    }

    fn from_tables(tables: Vec<BTreeMap<VertexId, Vec<VertexId>>>) -> Self {
        let workers = tables
            .into_iter()
            .map(|table| {
                table
                    .into_iter()
                    .map(|(id, mut out_edges)| {
                        out_edges.sort_unstable();
                        out_edges.dedup();
                        VertexState {
                            id,
                            value: S::zero(),
                            out_edges,
                            active: true,
                        }
                    })
                    .collect()
            })
            .collect();
        LoadedGraph { workers }
    }

    pub fn worker_count(&self) -> usize {
        self.workers.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.workers.iter().map(Vec::len).sum()
    }

    pub fn vertices(&self, worker: usize) -> &[VertexState<S>] {
        &self.workers[worker]
    }

    fn locate(&self, id: VertexId) -> Option<(usize, usize)> {
        let w = assign_worker(id, self.workers.len());
        self.workers[w]
            .binary_search_by_key(&id, |v| v.id)
            .ok()
            .map(|i| (w, i))
    }

    fn values(&self) -> BTreeMap<VertexId, S> {
        self.workers
            .iter()
            .flatten()
            .map(|v| (v.id, v.value))
            .collect()
    }
}

/// Barrier-time view handed to a run observer.
pub struct SuperstepSummary<'a, S> {
    pub superstep: u64,
    /// Vertices that ran compute in this superstep.
    pub computed: usize,
    /// Vertices still active after this superstep.
    pub active_after: usize,
    pub messages_sent: u64,
    pub aggregators: Vec<AggregatorSlot<S>>,
    graph: &'a LoadedGraph<S>,
}

impl<S: Scalar> SuperstepSummary<'_, S> {
    pub fn values(&self) -> BTreeMap<VertexId, S> {
        self.graph.values()
    }

    /// Sum of all vertex values, folded in ascending id order.
    pub fn value_sum(&self) -> S {
        self.values().values().fold(S::zero(), |acc, &v| acc + v)
    }
}

struct WorkerOutput<S> {
    outbox: Vec<MessageEnvelope<S>>,
    contributions: Vec<Contribution<S>>,
    computed: usize,
    delivered: u64,
}

fn run_worker<S: Scalar, P: VertexProgram<S> + ?Sized>(
    vertices: &mut [VertexState<S>],
    inbox: &mut [Vec<MessageEnvelope<S>>],
    superstep: u64,
    globals: &[S],
    program: &P,
) -> Result<WorkerOutput<S>, EngineError> {
    let mut out = WorkerOutput {
        outbox: Vec::new(),
        contributions: Vec::new(),
        computed: 0,
        delivered: 0,
    };
    for (vertex, mail) in vertices.iter_mut().zip(inbox.iter_mut()) {
        let messages = std::mem::take(mail);
        if !vertex.active && messages.is_empty() {
            continue;
        }
        vertex.active = true;
        out.computed += 1;
        out.delivered += messages.len() as u64;
        let id = vertex.id;
        let mut ctx = VertexContext {
            vertex,
            superstep,
            globals,
            outbox: &mut out.outbox,
            contributions: &mut out.contributions,
        };
        program
            .compute(&mut ctx, &messages)
            .map_err(|error| EngineError::Program {
                vertex: id,
                superstep,
                error,
            })?;
    }
    Ok(out)
}

/// Runs `program` over a set of partition files.
pub fn run<S: Scalar, P: VertexProgram<S> + ?Sized>(
    partitions: &[GraphPartition],
    program: &P,
    config: &EngineConfig,
) -> Result<RunReport<S>, EngineError> {
    validate(config)?;
    if partitions.len() != config.worker_count {
        return Err(EngineError::PartitionCount {
            partitions: partitions.len(),
            workers: config.worker_count,
        });
    }
    let graph = LoadedGraph::from_partitions(partitions, config.worker_count)?;
    run_loaded(graph, program, config, |_| {})
}

/// Runs `program` over an in-memory graph.
pub fn run_edge_list<S: Scalar, P: VertexProgram<S> + ?Sized>(
    graph: &EdgeList,
    program: &P,
    config: &EngineConfig,
) -> Result<RunReport<S>, EngineError> {
    validate(config)?;
    let graph = LoadedGraph::from_edge_list(graph, config.worker_count)?;
    run_loaded(graph, program, config, |_| {})
}

fn validate(config: &EngineConfig) -> Result<(), EngineError> {
    if config.worker_count == 0 {
        return Err(EngineError::Config("worker_count must be at least 1".into()));
    }
    if config.max_supersteps == 0 {
        return Err(EngineError::Config("max_supersteps must be at least 1".into()));
    }
    Ok(())
}

/// Runs a loaded graph, calling `observer` at every barrier.
pub fn run_loaded<S, P, F>(
    mut graph: LoadedGraph<S>,
    program: &P,
    config: &EngineConfig,
    mut observer: F,
) -> Result<RunReport<S>, EngineError>
where
    S: Scalar,
    P: VertexProgram<S> + ?Sized,
    F: FnMut(&SuperstepSummary<'_, S>),
{
    validate(config)?;
    if graph.worker_count() != config.worker_count {
        return Err(EngineError::PartitionCount {
            partitions: graph.worker_count(),
            workers: config.worker_count,
        });
    }
    let workers = config.worker_count;
    let mut inboxes: Vec<Vec<Vec<MessageEnvelope<S>>>> = graph
        .workers
        .iter()
        .map(|w| vec![Vec::new(); w.len()])
        .collect();
    let mut globals = vec![S::zero(); config.aggregator_slots];
    let mut pending: u64 = 0;
    let mut sent_total = 0;
    let mut delivered_total = 0;
    let mut superstep = 0u64;

    let halted_naturally = loop {
        let any_active = graph.workers.iter().flatten().any(|v| v.active);
        if graph.vertex_count() == 0 || (superstep > 0 && !any_active && pending == 0) {
            break true;
        }
        if superstep == config.max_supersteps {
            break false;
        }

        let outputs: Vec<Result<WorkerOutput<S>, EngineError>> = if workers == 1 {
            vec![run_worker(
                &mut graph.workers[0],
                &mut inboxes[0],
                superstep,
                &globals,
                program,
            )]
        } else {
            let globals = &globals;
            thread::scope(|scope| {
                let handles: Vec<_> = graph
                    .workers
                    .iter_mut()
                    .zip(inboxes.iter_mut())
                    .map(|(vertices, inbox)| {
                        scope.spawn(move || run_worker(vertices, inbox, superstep, globals, program))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("worker lane panicked"))
                    .collect()
            })
        };

        // barrier
        let mut computed = 0;
        let mut contributions = Vec::new();
        let mut sent = 0u64;
        let mut touched: Vec<(usize, usize)> = Vec::new();
        let mut errors = Vec::new();
        let mut outboxes = Vec::with_capacity(workers);
        for output in outputs {
            match output {
                Ok(out) => {
                    computed += out.computed;
                    delivered_total += out.delivered;
                    contributions.extend(out.contributions);
                    outboxes.push(out.outbox);
                }
                Err(e) => errors.push(e),
            }
        }
        if let Some(e) = errors.into_iter().min_by_key(|e| match e {
            EngineError::Program { vertex, .. } => *vertex,
            _ => 0,
        }) {
            return Err(e);
        }
        for envelope in outboxes.into_iter().flatten() {
            let (w, i) = graph
                .locate(envelope.dest)
                .ok_or(EngineError::UnknownDestination {
                    src: envelope.source,
                    dest: envelope.dest,
                })?;
            let mail = &mut inboxes[w][i];
            if mail.is_empty() {
                touched.push((w, i));
            }
            mail.push(envelope);
            sent += 1;
        }
        for (w, i) in touched {
            // stable: a source's messages keep their send order
            inboxes[w][i].sort_by_key(|m| m.source);
        }
        pending = sent;
        sent_total += sent;

        contributions.sort_by_key(|c: &Contribution<S>| c.vertex);
        let mut accumulated = vec![S::zero(); config.aggregator_slots];
        for c in &contributions {
            accumulated[c.slot] = accumulated[c.slot] + c.value;
        }
        let summary = SuperstepSummary {
            superstep,
            computed,
            active_after: graph.workers.iter().flatten().filter(|v| v.active).count(),
            messages_sent: sent,
            aggregators: accumulated
                .iter()
                .zip(&globals)
                .enumerate()
                .map(|(index, (&accumulated, &global))| AggregatorSlot {
                    index,
                    accumulated,
                    global,
                })
                .collect(),
            graph: &graph,
        };
        observer(&summary);
        globals = accumulated;
        superstep += 1;
    };

    Ok(RunReport {
        supersteps_executed: superstep,
        final_values: graph.values(),
        halted_naturally,
        messages_sent: sent_total,
        messages_delivered: delivered_total,
    })
}
