use std::collections::BTreeSet;
use std::sync::Mutex;

use crawlrank_core::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_graph(seed: u64, n: u64, density: f64, no_dangling: bool) -> EdgeList {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = BTreeSet::new();
    for s in 0..n {
        for d in 0..n {
            if rng.gen_bool(density) {
                edges.insert((s, d));
            }
        }
        if no_dangling && !edges.iter().any(|&(src, _)| src == s) {
            edges.insert((s, rng.gen_range(0..n)));
        }
    }
    EdgeList::with_vertices(n, edges)
}

fn partition_strategy() -> impl Strategy<Value = (GraphPartition, usize)> {
    (1usize..6)
        .prop_flat_map(|w| (Just(w), 0..w))
        .prop_flat_map(|(w, idx)| {
            let edges = proptest::collection::btree_set((0u64..40, 0u64..200), 0..30).prop_map(
                move |set| {
                    set.into_iter()
                        .map(|(k, d)| (k * w as u64 + idx as u64, d))
                        .collect::<BTreeSet<_>>()
                },
            );
            (Just(w), Just(idx), edges, 0u64..5)
        })
        .prop_map(|(w, idx, edges, extra)| {
            let edges: Vec<_> = edges.into_iter().collect();
            let sources = edges.iter().map(|e| e.0).collect::<BTreeSet<_>>().len() as u64;
            (
                GraphPartition {
                    worker_index: idx,
                    vertex_count: sources + extra,
                    edges,
                },
                w,
            )
        })
}

proptest! {
    #[test]
    fn partition_text_round_trips((p, w) in partition_strategy()) {
        let text = emit_partition(&p);
        let back = parse_partition(&text, p.worker_index, w).unwrap();
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(emit_partition(&back), text);
    }

    #[test]
    fn partitioning_is_lossless(
        edges in proptest::collection::vec((0u64..30, 0u64..30), 0..80),
        w in 1usize..7,
    ) {
        let g = EdgeList::with_vertices(30, edges);
        let parts = partition_graph(&g, w);
        prop_assert_eq!(parts.len(), w);
        let mut all: Vec<_> = parts.iter().flat_map(|p| p.edges.clone()).collect();
        all.sort();
        prop_assert_eq!(all, g.canonical_edges());
        prop_assert_eq!(parts.iter().map(|p| p.vertex_count).sum::<u64>(), 30);
        for p in &parts {
            prop_assert!(p.edges.iter().all(|&(s, _)| assign_worker(s, w) == p.worker_index));
            prop_assert!(p.edges.windows(2).all(|e| e[0] < e[1]));
        }
    }
}

#[test]
fn engine_matches_oracle_iterates_bitwise() {
    for seed in 0..12 {
        let g = random_graph(seed, 5 + seed * 7, 0.05 + 0.03 * seed as f64, seed % 2 == 0);
        for k in [1usize, 2, 7] {
            let params = PageRankParams::<f64>::new(0.85, 0.0).unwrap();
            let oracle = power_iteration(&g, &params, k);
            let cfg = EngineConfig::with_workers(3).max_supersteps(k as u64 + 1);
            let report = run_edge_list(&g, &PageRankProgram::new(params), &cfg).unwrap();
            assert!(!report.halted_naturally);
            for (id, v) in &oracle.values {
                assert_eq!(v.to_bits(), report.final_values[id].to_bits(), "seed {seed} k {k} vertex {id}");
            }
        }
    }
}

#[test]
fn converged_run_matches_oracle_stop() {
    for seed in 0..8 {
        let g = random_graph(100 + seed, 30, 0.1, true);
        let params = PageRankParams::<f64>::default();
        let oracle = power_iteration(&g, &params, 1000);
        let report = run_edge_list(&g, &PageRankProgram::new(params), &EngineConfig::with_workers(4)).unwrap();
        assert!(report.halted_naturally);
        // engine halts one superstep after the update that fell under eps
        assert_eq!(report.supersteps_executed as usize, oracle.iterations + 2);
        for (id, v) in &oracle.values {
            assert!((v - report.final_values[id]).abs() < 1e-9);
        }
    }
}

#[test]
fn worker_count_does_not_change_bits() {
    for seed in 0..6 {
        let g = random_graph(200 + seed, 40, 0.08, false);
        let prog = PageRankProgram::new(PageRankParams::<f64>::default());
        let one = run_edge_list(&g, &prog, &EngineConfig::with_workers(1)).unwrap();
        for w in [2, 4, 7] {
            assert_eq!(run_edge_list(&g, &prog, &EngineConfig::with_workers(w)).unwrap(), one);
        }
        // repeatability
        assert_eq!(run_edge_list(&g, &prog, &EngineConfig::with_workers(1)).unwrap(), one);
    }
}

#[test]
fn partition_file_route_equals_in_memory_route() {
    let g = random_graph(7, 25, 0.1, true);
    let prog = PageRankProgram::new(PageRankParams::<f64>::default());
    let parts: Vec<_> = partition_graph(&g, 4)
        .iter()
        .map(|p| parse_partition(&emit_partition(p), p.worker_index, 4).unwrap())
        .collect();
    let from_files = run(&parts, &prog, &EngineConfig::with_workers(4)).unwrap();
    let in_memory = run_edge_list(&g, &prog, &EngineConfig::with_workers(4)).unwrap();
    // every vertex of this graph is an edge endpoint, so nothing is lost in text
    assert_eq!(g.vertex_ids, EdgeList::from_edges(g.edges.clone()).vertex_ids);
    assert_eq!(from_files, in_memory);
}

#[test]
fn probe_sees_only_previous_superstep() {
    // each vertex sends its superstep index; receivers check the stamp
    let g = random_graph(3, 12, 0.3, true);
    let log = Mutex::new(Vec::new());
    let probe = |ctx: &mut VertexContext<'_, f64>, msgs: &[MessageEnvelope<f64>]| {
        let s = ctx.superstep_index();
        for m in msgs {
            assert_eq!(m.payload, (s - 1) as f64);
            assert_eq!(m.dest, ctx.id());
        }
        assert!(msgs.windows(2).all(|w| w[0].source <= w[1].source));
        if s > 0 {
            assert_eq!(ctx.get_aggr_global(0)?, 12.0 * (s - 1) as f64);
        }
        ctx.accumulate_aggr(0, s as f64)?;
        log.lock().unwrap().push((s, ctx.id(), msgs.len()));
        if s < 4 {
            ctx.send_message_to_all_neighbors(s as f64);
        } else {
            ctx.vote_to_halt();
        }
        Ok(())
    };
    let report = run_edge_list(&g, &probe, &EngineConfig::with_workers(3)).unwrap();
    assert_eq!(report.supersteps_executed, 5);
    assert_eq!(report.messages_sent, report.messages_delivered);
    assert_eq!(report.messages_sent, 4 * g.canonical_edges().len() as u64);
    let log = log.into_inner().unwrap();
    assert_eq!(log.len(), 12 * 5);
    let received: usize = log.iter().map(|e| e.2).sum();
    assert_eq!(received as u64, report.messages_delivered);
}

#[test]
fn mass_is_conserved_without_dangling_vertices() {
    for seed in 0..6 {
        let g = random_graph(300 + seed, 50, 0.1, true);
        let n = 50.0;
        let prog = PageRankProgram::new(PageRankParams::<f64>::default());
        let graph = LoadedGraph::from_edge_list(&g, 4).unwrap();
        let mut sums = Vec::new();
        run_loaded(graph, &prog, &EngineConfig::with_workers(4), |s| sums.push(s.value_sum())).unwrap();
        assert_eq!(sums[0], n);
        for sum in sums {
            assert!((sum - n).abs() <= 1e-9 * n, "{sum}");
        }
    }
}

#[test]
fn tiny_damping_flattens_values() {
    let g = random_graph(9, 30, 0.2, false);
    let params = PageRankParams::<f64>::new(1e-12, 0.0).unwrap();
    let cfg = EngineConfig::default().max_supersteps(2);
    let report = run_edge_list(&g, &PageRankProgram::new(params), &cfg).unwrap();
    for v in report.final_values.values() {
        assert!((v - 1.0).abs() < 1e-9);
    }
}

#[test]
fn strongly_connected_graphs_halt_and_rank_agrees() {
    for seed in 0..6 {
        let n = 20 + seed * 5;
        let mut g = random_graph(400 + seed, n, 0.1, true);
        // add a Hamiltonian cycle to guarantee strong connectivity
        g.edges.extend((0..n).map(|i| (i, (i + 1) % n)));
        let params = PageRankParams::<f64>::default();
        let report = run_edge_list(&g, &PageRankProgram::new(params), &EngineConfig::with_workers(4)).unwrap();
        assert!(report.halted_naturally);
        let oracle = power_iteration(&g, &params, 1000);
        assert_eq!(rank(&report.final_values).top().unwrap().0, rank(&oracle.values).top().unwrap().0);
    }
}

#[test]
fn dangling_vertices_do_not_fault() {
    let g = EdgeList::with_vertices(5, [(0, 1), (1, 2), (2, 0), (2, 3), (4, 3)]);
    let params = PageRankParams::<f64>::default();
    let report = run_edge_list(&g, &PageRankProgram::new(params), &EngineConfig::with_workers(4)).unwrap();
    assert!(report.halted_naturally);
    assert!(report.final_values.values().all(|v| v.is_finite() && *v > 0.0));
    let oracle = power_iteration(&g, &params, 1000);
    for (id, v) in &oracle.values {
        assert!((v - report.final_values[id]).abs() < 1e-9);
    }
}
