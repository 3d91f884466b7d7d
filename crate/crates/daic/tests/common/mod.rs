//! Shared helpers for the integration and acceptance suites.

#![allow(dead_code)]

use daic::graph::{generate, Graph, GeneratorConfig, VertexId};
use daic::kernel::Value;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

/// Seeded random directed graph, ids `1..=n`.
pub fn random_graph(n: u64, seed: u64, weighted: bool) -> Graph {
    generate(&GeneratorConfig {
        node_count: n,
        degree_mu: 0.5,
        degree_sigma: 1.0,
        weight: if weighted { Some((0.0, 1.0)) } else { None },
        seed,
    })
    .unwrap()
}

/// Random graph where every vertex has at least one out-edge (dangling
/// vertices get an edge to their successor), for mass-conserving
/// ranking tests.
pub fn random_graph_no_dangling(n: u64, seed: u64) -> Graph {
    let g = random_graph(n, seed, false);
    let mut edges: Vec<(u64, u64, f64)> = g.edges().map(|(s, t, w)| (s.0, t.0, w)).collect();
    for &v in g.vertices() {
        if g.out_degree(v) == 0 {
            // v mod n + 1 never equals v for n >= 2.
            edges.push((v.0, v.0 % n + 1, 1.0));
        }
    }
    Graph::from_edges(1..=n, edges, false).unwrap()
}

/// Random symmetric graph (every edge paired with its reverse).
pub fn random_symmetric_graph(n: u64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let target = (n as usize) * 2;
    while edges.len() < target {
        let a = rng.random_range(1..=n);
        let b = rng.random_range(1..=n);
        if a != b && seen.insert((a.min(b), a.max(b))) {
            edges.push((a, b, 1.0));
            edges.push((b, a, 1.0));
        }
        if seen.len() > 4 * n as usize {
            break;
        }
    }
    Graph::from_edges(1..=n, edges, false).unwrap()
}

/// Layered DAG: `layers x width` vertices, each (except the last layer)
/// pointing at up to `fanout` distinct vertices in the next layer.
/// Bounded depth and fanout keep exact path counts inside i64.
pub fn layered_dag(layers: usize, width: usize, fanout: usize, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vid = |layer: usize, slot: usize| (layer * width + slot) as u64 + 1;
    let mut edges = Vec::new();
    for layer in 0..layers - 1 {
        for slot in 0..width {
            let mut picked = std::collections::HashSet::new();
            for _ in 0..fanout {
                picked.insert(rng.random_range(0..width));
            }
            for t in picked {
                edges.push((vid(layer, slot), vid(layer + 1, t), 1.0));
            }
        }
    }
    Graph::from_edges(1..=(layers * width) as u64, edges, false).unwrap()
}

/// Ground truth for the unit-delta counter: at quiescence each vertex
/// holds `1 + sum over in-neighbors' counts`, i.e. the number of paths
/// into it including the empty one. Computed by dynamic programming in
/// topological order (Kahn), independent of the delta machinery.
pub fn path_count_total(graph: &Graph) -> i64 {
    let vids = graph.vertices();
    let index: HashMap<u64, usize> = vids.iter().enumerate().map(|(i, v)| (v.0, i)).collect();
    let n = vids.len();
    let mut indegree = vec![0usize; n];
    for (_, t, _) in graph.edges() {
        indegree[index[&t.0]] += 1;
    }
    let mut queue: std::collections::VecDeque<usize> =
        (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut count = vec![1i64; n];
    let mut seen = 0;
    while let Some(i) = queue.pop_front() {
        seen += 1;
        for &(t, _) in graph.out_edges(vids[i]) {
            let j = index[&t.0];
            count[j] += count[i];
            indegree[j] -= 1;
            if indegree[j] == 0 {
                queue.push_back(j);
            }
        }
    }
    assert_eq!(seen, n, "graph must be acyclic");
    count.iter().sum()
}

/// Sum of absolute differences between two result vectors over the same
/// vid set. Mismatched infinities count as infinite distance.
pub fn l1_distance<V: Value>(
    a: &[(VertexId, V)],
    b: &[(VertexId, V)],
    to_scalar: impl Fn(&V) -> f64,
) -> f64 {
    assert_eq!(a.len(), b.len(), "result vectors differ in length");
    a.iter()
        .zip(b)
        .map(|((va, x), (vb, y))| {
            assert_eq!(va, vb, "vid mismatch");
            let (x, y) = (to_scalar(x), to_scalar(y));
            if x == y {
                0.0
            } else {
                (x - y).abs()
            }
        })
        .sum()
}

pub fn scalar(v: &f64) -> f64 {
    *v
}
