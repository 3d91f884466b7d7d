//! Deterministic single-threaded execution and the reference oracles.
//!
//! Everything here exists to pin down what the concurrent engine must
//! compute:
//!
//! - [`run_sequence`] executes an explicit sequence of vertex subsets,
//!   delivering each subset's messages either at the next subset
//!   boundary (the synchronous special case) or immediately within the
//!   pass.
//! - [`path_sum`] evaluates the closed form of a vertex state after `k`
//!   rounds by enumerating every walk into the vertex and composing the
//!   per-edge function along it.
//! - [`traditional_iterate`] runs the classical full-state update,
//!   reconstructing each vertex's constant term from the kernel's
//!   initialisation.
//! - [`oracles`] holds independent textbook solvers (Dijkstra, dense
//!   power iteration, Gaussian elimination, union-find, naive pairwise
//!   similarity) used as ground truth.
//!
//! States are reported as `value + pending delta` per vertex: the value
//! an update would produce at that instant. This makes the synchronous
//! sequence of length `k` agree exactly with the `k`-hop closed form.

pub mod oracles;
pub mod rational;

use std::collections::HashMap;

use thiserror::Error;

use crate::engine::state::{build_tables, receive, update_into, StateTable};
use crate::graph::{Graph, VertexId};
use crate::kernel::{EdgeContext, Kernel, Value, VertexData};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{0}")]
    Guard(String),
    #[error("vertex {0} is not in the graph")]
    UnknownVertex(VertexId),
    #[error("no convergence: {0}")]
    NoConvergence(String),
}

/// An explicit update schedule: an ordered list of vertex subsets. The
/// vertices of subset `t` update during interval `t`, and their
/// messages are receivable from interval `t + 1` on (or immediately,
/// under [`Delivery::Immediate`]).
#[derive(Debug, Clone)]
pub struct UpdateSequence {
    pub subsets: Vec<Vec<VertexId>>,
}

impl UpdateSequence {
    /// `{V, V, ..., V}`: the synchronous schedule.
    pub fn synchronous(graph: &Graph, rounds: usize) -> Self {
        let all: Vec<VertexId> = graph.vertices().to_vec();
        UpdateSequence { subsets: vec![all; rounds] }
    }

    /// One singleton subset per vertex in ascending vid order, repeated
    /// for `passes` full sweeps.
    pub fn singleton_passes(graph: &Graph, passes: usize) -> Self {
        let mut subsets = Vec::with_capacity(graph.vertex_count() * passes);
        for _ in 0..passes {
            subsets.extend(graph.vertices().iter().map(|&v| vec![v]));
        }
        UpdateSequence { subsets }
    }
}

/// When the messages produced inside a subset become visible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delivery {
    /// At the subset boundary: updates within a subset see only state
    /// from before the subset. `synchronous` sequences under this rule
    /// reproduce lock-step rounds exactly.
    AtBoundary,
    /// Immediately: a vertex updating later in the same subset sees the
    /// deltas of earlier ones. This is the single-machine asynchronous
    /// schedule following the same update order.
    Immediate,
}

fn state_vector<V: Value>(table: &StateTable<V>, kernel: &Kernel<V>) -> Vec<(VertexId, V)> {
    table
        .entries()
        .iter()
        .map(|e| (e.vid, kernel.accumulate(&e.value, &e.delta)))
        .collect()
}

/// Runs the schedule and returns the final state vector.
pub fn run_sequence<V: Value>(
    graph: &Graph,
    kernel: &Kernel<V>,
    seq: &UpdateSequence,
    delivery: Delivery,
) -> Result<Vec<(VertexId, V)>, SimError> {
    Ok(run_sequence_boundaries(graph, kernel, seq, delivery)?
        .pop()
        .unwrap_or_else(|| {
            let table = &build_tables(graph, kernel, 1)[0];
            state_vector(table, kernel)
        }))
}

/// Runs the schedule and returns the state vector observed at every
/// subset boundary.
pub fn run_sequence_boundaries<V: Value>(
    graph: &Graph,
    kernel: &Kernel<V>,
    seq: &UpdateSequence,
    delivery: Delivery,
) -> Result<Vec<Vec<(VertexId, V)>>, SimError> {
    let mut table = build_tables(graph, kernel, 1).swap_remove(0);
    for subset in &seq.subsets {
        for &vid in subset {
            if table.get(vid).is_none() {
                return Err(SimError::UnknownVertex(vid));
            }
        }
    }

    let mut boundaries = Vec::with_capacity(seq.subsets.len());
    let mut outbox = Vec::new();
    for subset in &seq.subsets {
        let mut order: Vec<VertexId> = subset.clone();
        order.sort_unstable();
        order.dedup();
        for vid in order {
            let entry = table.get_mut(vid).expect("validated above");
            update_into(entry, kernel, &mut outbox);
            if delivery == Delivery::Immediate {
                for m in outbox.drain(..) {
                    if let Some(e) = table.get_mut(m.dest) {
                        receive(e, m.value, kernel);
                    }
                }
            }
        }
        for m in outbox.drain(..) {
            if let Some(e) = table.get_mut(m.dest) {
                receive(e, m.value, kernel);
            }
        }
        boundaries.push(state_vector(&table, kernel));
    }
    Ok(boundaries)
}

const PATH_SUM_MAX_VERTICES: usize = 8;
const PATH_SUM_MAX_HOPS: usize = 5;

/// Evaluates the closed form of vertex `target` after `hops` rounds:
/// its initial value and delta, folded with the per-edge composition of
/// every walk of length `1..=hops` that ends at `target`, each walk
/// carrying its origin's initial delta. Exponential in `hops`, hence
/// the tight guards.
pub fn path_sum<V: Value>(
    graph: &Graph,
    kernel: &Kernel<V>,
    target: VertexId,
    hops: usize,
) -> Result<V, SimError> {
    if graph.vertex_count() > PATH_SUM_MAX_VERTICES || hops > PATH_SUM_MAX_HOPS {
        return Err(SimError::Guard(format!(
            "path enumeration limited to {PATH_SUM_MAX_VERTICES} vertices and {PATH_SUM_MAX_HOPS} hops"
        )));
    }
    if !graph.contains(target) {
        return Err(SimError::UnknownVertex(target));
    }
    let data: HashMap<VertexId, VertexData> = graph
        .vertices()
        .iter()
        .map(|&v| (v, VertexData { out_edges: graph.out_edges(v).to_vec() }))
        .collect();
    let in_edges = graph.in_edges();
    let deltas: HashMap<VertexId, V> = graph
        .vertices()
        .iter()
        .map(|&v| (v, kernel.init_vertex(v, &data[&v]).1))
        .collect();

    let (v0, dv1) = kernel.init_vertex(target, &data[&target]);
    let mut acc = kernel.accumulate(&v0, &dv1);

    // Backward walk enumeration: a walk of length l into `end` is a
    // walk of length l-1 into one of its in-neighbors, extended.
    fn walks_into(
        in_edges: &HashMap<VertexId, Vec<(VertexId, f64)>>,
        end: VertexId,
        len: usize,
    ) -> Vec<Vec<VertexId>> {
        if len == 0 {
            return vec![vec![end]];
        }
        let mut out = Vec::new();
        for &(src, _) in &in_edges[&end] {
            for mut walk in walks_into(in_edges, src, len - 1) {
                walk.push(end);
                out.push(walk);
            }
        }
        out
    }

    let weight_of = |a: VertexId, b: VertexId| -> f64 {
        graph
            .out_edges(a)
            .iter()
            .find(|&&(t, _)| t == b)
            .map(|&(_, w)| w)
            .expect("walk follows edges")
    };

    for len in 1..=hops {
        for walk in walks_into(&in_edges, target, len) {
            let mut value = deltas[&walk[0]].clone();
            for pair in walk.windows(2) {
                let (a, b) = (pair[0], pair[1]);
                let ctx = EdgeContext {
                    source: a,
                    target: b,
                    weight: weight_of(a, b),
                    source_data: &data[&a],
                };
                value = kernel.edge_message(&ctx, &value);
            }
            acc = kernel.accumulate(&acc, &value);
        }
    }
    Ok(acc)
}

/// Classical lock-step iteration: every vertex recomputes its state
/// from all in-neighbor states plus its constant term, `steps` times
/// starting from the initial values. The constant term is recovered
/// from the kernel's initialisation (`value0 + delta1`), which is valid
/// whenever the per-edge images of the initial values fold to the
/// identity.
pub fn traditional_iterate<V: Value>(
    graph: &Graph,
    kernel: &Kernel<V>,
    steps: usize,
) -> Vec<(VertexId, V)> {
    let vids = graph.vertices();
    let data: Vec<VertexData> =
        vids.iter().map(|&v| VertexData { out_edges: graph.out_edges(v).to_vec() }).collect();
    let index: HashMap<u64, usize> = vids.iter().enumerate().map(|(i, v)| (v.0, i)).collect();
    let mut values = Vec::with_capacity(vids.len());
    let mut constants = Vec::with_capacity(vids.len());
    for (i, &v) in vids.iter().enumerate() {
        let (v0, dv1) = kernel.init_vertex(v, &data[i]);
        constants.push(kernel.accumulate(&v0, &dv1));
        values.push(v0);
    }
    let in_edges = graph.in_edges();

    for _ in 0..steps {
        let mut next = Vec::with_capacity(values.len());
        for (j, &vid) in vids.iter().enumerate() {
            let mut acc = kernel.zero().clone();
            let mut sources = in_edges[&vid].clone();
            sources.sort_by_key(|&(s, _)| s);
            for (src, weight) in sources {
                let si = index[&src.0];
                let ctx = EdgeContext {
                    source: src,
                    target: vid,
                    weight,
                    source_data: &data[si],
                };
                acc = kernel.accumulate(&acc, &kernel.edge_message(&ctx, &values[si]));
            }
            acc = kernel.accumulate(&acc, &constants[j]);
            next.push(acc);
        }
        values = next;
    }
    vids.iter().copied().zip(values).collect()
}

/// Iterates [`traditional_iterate`] one step at a time until every
/// vertex is stable within `tol`.
pub fn iterate_to_fixpoint<V: Value>(
    graph: &Graph,
    kernel: &Kernel<V>,
    tol: f64,
    max_steps: usize,
) -> Result<Vec<(VertexId, V)>, SimError> {
    let mut current = traditional_iterate(graph, kernel, 0);
    for step in 1..=max_steps {
        let next = traditional_iterate(graph, kernel, step);
        let stable = current
            .iter()
            .zip(&next)
            .all(|((_, a), (_, b))| a.approx_eq(b, tol));
        current = next;
        if stable {
            return Ok(current);
        }
    }
    Err(SimError::NoConvergence(format!("not stable after {max_steps} steps")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{
        connected_components_kernel, jacobi_kernel, pagerank_kernel, simrank_kernel, sssp_kernel,
        LinearSystem,
    };
    use crate::graph::{generate, GeneratorConfig};
    use crate::kernel::approx_eq_f64;

    fn value_of(states: &[(VertexId, f64)], vid: u64) -> f64 {
        states.iter().find(|&&(v, _)| v == VertexId(vid)).unwrap().1
    }

    #[test]
    fn two_node_pagerank_one_round() {
        // Single 1-hop walk: state of vertex 2 after one round is
        // 0 + 0.2 + 0.8 * 0.2 / 1 = 0.36.
        let g = Graph::from_edges([1, 2], [(1, 2, 1.0)], false).unwrap();
        let k = pagerank_kernel(0.8);
        let direct = path_sum(&g, &k, VertexId(2), 1).unwrap();
        assert!(approx_eq_f64(direct, 0.36, 1e-12));

        let seq = UpdateSequence::synchronous(&g, 1);
        let states = run_sequence(&g, &k, &seq, Delivery::AtBoundary).unwrap();
        assert!(approx_eq_f64(value_of(&states, 2), 0.36, 1e-12));
    }

    #[test]
    fn path_sum_zero_hops_is_initial_state() {
        let g = Graph::from_edges([1, 2], [(1, 2, 1.0)], false).unwrap();
        let k = pagerank_kernel(0.8);
        let v = path_sum(&g, &k, VertexId(1), 0).unwrap();
        assert!(approx_eq_f64(v, 0.2, 1e-12));
    }

    #[test]
    fn path_sum_guard() {
        let g = Graph::from_edges(1..=9, [], false).unwrap();
        assert!(matches!(
            path_sum(&g, &pagerank_kernel(0.8), VertexId(1), 1),
            Err(SimError::Guard(_))
        ));
    }

    #[test]
    fn empty_subset_changes_nothing() {
        let g = Graph::from_edges([], [(1, 2, 1.0), (2, 1, 1.0)], false).unwrap();
        let k = pagerank_kernel(0.8);
        let seq = UpdateSequence { subsets: vec![vec![]] };
        let states = run_sequence(&g, &k, &seq, Delivery::AtBoundary).unwrap();
        for (_, v) in states {
            assert!(approx_eq_f64(v, 0.2, 1e-12));
        }
    }

    #[test]
    fn path_sum_matches_synchronous_sequence_on_random_graphs() {
        // The closed form and the executed synchronous schedule are two
        // independent routes to the same state.
        for seed in 0..10 {
            let g = generate(&GeneratorConfig {
                node_count: 6,
                degree_mu: 0.3,
                degree_sigma: 0.7,
                weight: Some((0.0, 0.5)),
                seed,
            })
            .unwrap();
            let kernels =
                [pagerank_kernel(0.8), sssp_kernel(VertexId(1)), connected_components_kernel()];
            for k in kernels {
                for hops in 0..=4 {
                    let seq = UpdateSequence::synchronous(&g, hops);
                    let states = run_sequence(&g, &k, &seq, Delivery::AtBoundary).unwrap();
                    for &vid in g.vertices() {
                        let direct = path_sum(&g, &k, vid, hops).unwrap();
                        let executed =
                            states.iter().find(|&&(v, _)| v == vid).unwrap().1;
                        assert!(
                            approx_eq_f64(direct, executed, 1e-12),
                            "kernel {} seed {seed} vid {vid} hops {hops}: {direct} vs {executed}",
                            k.name()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn traditional_iterate_zero_steps_is_initial() {
        let g = Graph::from_edges([], [(1, 2, 1.0)], false).unwrap();
        let k = pagerank_kernel(0.8);
        let states = traditional_iterate(&g, &k, 0);
        for (_, v) in states {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn traditional_pagerank_matches_power_iteration() {
        let g = generate(&GeneratorConfig {
            node_count: 40,
            degree_mu: 0.5,
            degree_sigma: 1.0,
            weight: None,
            seed: 21,
        })
        .unwrap();
        let k = pagerank_kernel(0.8);
        for steps in [1, 3, 7] {
            let ours = traditional_iterate(&g, &k, steps);
            let reference = oracles::pagerank_power_steps(&g, 0.8, steps);
            for ((vid, a), (rvid, b)) in ours.iter().zip(&reference) {
                assert_eq!(vid, rvid);
                assert!(approx_eq_f64(*a, *b, 1e-12), "step {steps} vid {vid}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn traditional_sssp_matches_bellman_ford() {
        let g = generate(&GeneratorConfig {
            node_count: 30,
            degree_mu: 0.6,
            degree_sigma: 0.8,
            weight: Some((0.0, 1.0)),
            seed: 5,
        })
        .unwrap();
        let k = sssp_kernel(VertexId(1));
        // n steps suffice: longest useful path has < n hops.
        let ours = traditional_iterate(&g, &k, 30);
        let reference = oracles::bellman_ford(&g, VertexId(1));
        for ((vid, a), (rvid, b)) in ours.iter().zip(&reference) {
            assert_eq!(vid, rvid);
            assert_eq!(a, b, "vid {vid}");
        }
    }

    #[test]
    fn immediate_delivery_dominates_boundary_delivery() {
        // Same schedule, both monotone kernels: at every boundary the
        // immediate-delivery state is at least as close to the fixed
        // point as the boundary-delivery state.
        for seed in [1u64, 2, 3] {
            let g = generate(&GeneratorConfig {
                node_count: 20,
                degree_mu: 0.5,
                degree_sigma: 0.8,
                weight: Some((0.0, 0.7)),
                seed,
            })
            .unwrap();
            for k in [pagerank_kernel(0.8), sssp_kernel(VertexId(1))] {
                let fixed = iterate_to_fixpoint(&g, &k, 1e-13, 10_000).unwrap();
                let seq = UpdateSequence::synchronous(&g, 15);
                let sync = run_sequence_boundaries(&g, &k, &seq, Delivery::AtBoundary).unwrap();
                let imm = run_sequence_boundaries(&g, &k, &seq, Delivery::Immediate).unwrap();
                for (round, (s, m)) in sync.iter().zip(&imm).enumerate() {
                    for (((vid, sv), (_, mv)), (_, fv)) in s.iter().zip(m).zip(&fixed) {
                        let (ds, dm) = (dist(*fv, *sv), dist(*fv, *mv));
                        assert!(
                            dm <= ds + 1e-12,
                            "kernel {} seed {seed} round {round} vid {vid}: |v*-imm|={dm} > |v*-sync|={ds}",
                            k.name()
                        );
                    }
                }
            }
        }

        fn dist(target: f64, x: f64) -> f64 {
            if target == x {
                0.0
            } else if !target.is_finite() || !x.is_finite() {
                f64::INFINITY
            } else {
                (target - x).abs()
            }
        }
    }

    #[test]
    fn priority_singletons_leave_no_pending_delta() {
        // Argmax-priority scheduling with immediate delivery drains
        // every delta on kernels that quiesce exactly.
        let g = generate(&GeneratorConfig {
            node_count: 25,
            degree_mu: 0.6,
            degree_sigma: 0.8,
            weight: Some((0.0, 1.0)),
            seed: 9,
        })
        .unwrap();
        let k = sssp_kernel(VertexId(1));
        let mut table = build_tables(&g, &k, 1).swap_remove(0);
        let mut out = Vec::new();
        for _ in 0..200_000 {
            let next = table
                .entries()
                .iter()
                .filter(|e| e.delta != *k.zero())
                .max_by(|a, b| a.priority.total_cmp(&b.priority).then(b.vid.cmp(&a.vid)))
                .map(|e| e.vid);
            let Some(vid) = next else { break };
            let entry = table.get_mut(vid).unwrap();
            update_into(entry, &k, &mut out);
            for m in out.drain(..) {
                if let Some(e) = table.get_mut(m.dest) {
                    receive(e, m.value, &k);
                }
            }
        }
        for e in table.entries() {
            assert_eq!(e.delta, f64::INFINITY, "vertex {} retains a delta", e.vid);
        }
        // And the result is the true fixed point.
        let reference = oracles::dijkstra(&g, VertexId(1));
        for (e, (rvid, d)) in table.entries().iter().zip(&reference) {
            assert_eq!(e.vid, *rvid);
            assert_eq!(e.value, *d);
        }
    }

    #[test]
    fn jacobi_fixpoint_matches_direct_solve() {
        let sys = LinearSystem::random_diagonally_dominant(10, 33);
        let (g, k) = jacobi_kernel(&sys).unwrap();
        let iterated = iterate_to_fixpoint(&g, &k, 1e-12, 100_000).unwrap();
        let direct = oracles::gaussian_solve(&sys).unwrap();
        for ((vid, a), b) in iterated.iter().zip(&direct) {
            assert!(approx_eq_f64(*a, *b, 1e-8), "unknown {vid}: {a} vs {b}");
        }
    }

    #[test]
    fn simrank_fixpoint_matches_naive_iteration() {
        let g = generate(&GeneratorConfig {
            node_count: 10,
            degree_mu: 0.4,
            degree_sigma: 0.8,
            weight: None,
            seed: 17,
        })
        .unwrap();
        let c = 0.6;
        let (exec, kernel, pairs) = simrank_kernel(&g, c, 100).unwrap();
        let iterated = iterate_to_fixpoint(&exec, &kernel, 1e-12, 10_000).unwrap();
        let naive = oracles::simrank_naive(&g, c, 1e-13, 10_000).unwrap();
        for (vid, ours) in iterated {
            let (a, b) = pairs.unpack(vid);
            let reference = naive[(a.0 as usize - 1) * pairs.base_len() + (b.0 as usize - 1)];
            assert!(
                approx_eq_f64(ours, reference, 1e-8),
                "pair ({a},{b}): accumulated {ours} vs naive {reference}"
            );
        }
    }
}
