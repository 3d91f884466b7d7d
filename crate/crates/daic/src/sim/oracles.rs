//! Independent ground-truth solvers. Nothing here goes through a
//! kernel's closures: each oracle implements its algorithm directly
//! from the graph (or system), so a bug in the delta machinery cannot
//! hide in both routes.

use std::collections::HashMap;

use super::SimError;
use crate::algorithms::{Algorithm, AlgorithmSpec, LinearSystem};
use crate::graph::{Graph, VertexId};

/// Binary-heap Dijkstra. Distances are `f64`; unreachable vertices stay
/// at infinity. Weights must be non-negative.
pub fn dijkstra(graph: &Graph, source: VertexId) -> Vec<(VertexId, f64)> {
    use std::cmp::Ordering;
    use std::collections::BinaryHeap;

    #[derive(PartialEq)]
    struct Item(f64, u64);
    impl Eq for Item {}
    impl PartialOrd for Item {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Item {
        fn cmp(&self, other: &Self) -> Ordering {
            // Reverse on distance for a min-heap; weights are finite.
            other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
        }
    }

    let mut dist: HashMap<u64, f64> =
        graph.vertices().iter().map(|v| (v.0, f64::INFINITY)).collect();
    let mut heap = BinaryHeap::new();
    if graph.contains(source) {
        dist.insert(source.0, 0.0);
        heap.push(Item(0.0, source.0));
    }
    while let Some(Item(d, v)) = heap.pop() {
        if d > dist[&v] {
            continue;
        }
        for &(t, w) in graph.out_edges(VertexId(v)) {
            let candidate = d + w;
            if candidate < dist[&t.0] {
                dist.insert(t.0, candidate);
                heap.push(Item(candidate, t.0));
            }
        }
    }
    graph.vertices().iter().map(|&v| (v, dist[&v.0])).collect()
}

/// Bellman-Ford relaxation until no edge relaxes.
pub fn bellman_ford(graph: &Graph, source: VertexId) -> Vec<(VertexId, f64)> {
    let mut dist: HashMap<u64, f64> =
        graph.vertices().iter().map(|v| (v.0, f64::INFINITY)).collect();
    if graph.contains(source) {
        dist.insert(source.0, 0.0);
    }
    for _ in 0..graph.vertex_count() {
        let mut relaxed = false;
        for (s, t, w) in graph.edges() {
            let ds = dist[&s.0];
            if ds.is_finite() && ds + w < dist[&t.0] {
                dist.insert(t.0, ds + w);
                relaxed = true;
            }
        }
        if !relaxed {
            break;
        }
    }
    graph.vertices().iter().map(|&v| (v, dist[&v.0])).collect()
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// Component labels over the undirected closure of the edge set: every
/// vertex maps to the largest vid in its component.
pub fn union_find_components(graph: &Graph) -> Vec<(VertexId, f64)> {
    let vids = graph.vertices();
    let index: HashMap<u64, usize> = vids.iter().enumerate().map(|(i, v)| (v.0, i)).collect();
    let mut uf = UnionFind::new(vids.len());
    for (s, t, _) in graph.edges() {
        uf.union(index[&s.0], index[&t.0]);
    }
    let mut max_of_root: HashMap<usize, u64> = HashMap::new();
    for (i, v) in vids.iter().enumerate() {
        let root = uf.find(i);
        let entry = max_of_root.entry(root).or_insert(v.0);
        *entry = (*entry).max(v.0);
    }
    vids.iter()
        .enumerate()
        .map(|(i, &v)| {
            let root = uf.find(i);
            (v, max_of_root[&root] as f64)
        })
        .collect()
}

/// Literal power iteration of the full ranking update for `steps`
/// rounds from an all-zero start.
pub fn pagerank_power_steps(graph: &Graph, damping: f64, steps: usize) -> Vec<(VertexId, f64)> {
    let vids = graph.vertices();
    let index: HashMap<u64, usize> = vids.iter().enumerate().map(|(i, v)| (v.0, i)).collect();
    let mut rank = vec![0.0f64; vids.len()];
    for _ in 0..steps {
        let mut next = vec![1.0 - damping; vids.len()];
        for (i, &v) in vids.iter().enumerate() {
            let out = graph.out_edges(v);
            if out.is_empty() || rank[i] == 0.0 {
                continue;
            }
            let share = damping * rank[i] / out.len() as f64;
            for &(t, _) in out {
                next[index[&t.0]] += share;
            }
        }
        rank = next;
    }
    vids.iter().copied().zip(rank).collect()
}

/// Power iteration run to a fixed point (max change below `tol`).
pub fn pagerank_power(
    graph: &Graph,
    damping: f64,
    tol: f64,
    max_steps: usize,
) -> Result<Vec<(VertexId, f64)>, SimError> {
    let mut prev = pagerank_power_steps(graph, damping, 0);
    for step in 1..=max_steps {
        let next = pagerank_power_steps(graph, damping, step);
        let delta: f64 =
            prev.iter().zip(&next).map(|((_, a), (_, b))| (a - b).abs()).sum();
        prev = next;
        if delta < tol {
            return Ok(prev);
        }
    }
    Err(SimError::NoConvergence(format!("ranking not stable after {max_steps} rounds")))
}

/// Generic dense fixed-point iteration `x_j = sum_i coeff[i][j] * x_i +
/// constant[j]`, iterated until stable. Coefficients are indexed by
/// vertex position.
fn linear_fixpoint(
    coeff: &[Vec<(usize, f64)>],
    constant: &[f64],
    tol: f64,
    max_steps: usize,
) -> Result<Vec<f64>, SimError> {
    let n = constant.len();
    let mut x = vec![0.0f64; n];
    for _ in 0..max_steps {
        let mut next = constant.to_vec();
        for (i, outs) in coeff.iter().enumerate() {
            if x[i] == 0.0 {
                continue;
            }
            for &(j, w) in outs {
                next[j] += w * x[i];
            }
        }
        let delta: f64 = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        let finite = next.iter().all(|v| v.is_finite());
        x = next;
        if !finite {
            return Err(SimError::NoConvergence("iteration diverged to non-finite values".into()));
        }
        if delta < tol {
            return Ok(x);
        }
    }
    Err(SimError::NoConvergence(format!("linear iteration not stable after {max_steps} steps")))
}

/// Katz proximity from a source: `x_j = beta * sum_{i->j} w * x_i +
/// [j = source]`.
pub fn katz_scores(
    graph: &Graph,
    beta: f64,
    source: VertexId,
    tol: f64,
) -> Result<Vec<(VertexId, f64)>, SimError> {
    let vids = graph.vertices();
    let index: HashMap<u64, usize> = vids.iter().enumerate().map(|(i, v)| (v.0, i)).collect();
    let coeff: Vec<Vec<(usize, f64)>> = vids
        .iter()
        .map(|&v| {
            graph.out_edges(v).iter().map(|&(t, w)| (index[&t.0], beta * w)).collect()
        })
        .collect();
    let constant: Vec<f64> =
        vids.iter().map(|&v| if v == source { 1.0 } else { 0.0 }).collect();
    let x = linear_fixpoint(&coeff, &constant, tol, 200_000)?;
    Ok(vids.iter().copied().zip(x).collect())
}

/// Authority scores: independent dense build of the co-citation matrix
/// followed by damped fixed-point iteration.
pub fn hits_authority_scores(
    graph: &Graph,
    damping: f64,
    tol: f64,
) -> Result<Vec<(VertexId, f64)>, SimError> {
    let vids = graph.vertices();
    let index: HashMap<u64, usize> = vids.iter().enumerate().map(|(i, v)| (v.0, i)).collect();
    let n = vids.len();
    let mut gram = vec![vec![0.0f64; n]; n];
    for &k in vids {
        for &(i, wi) in graph.out_edges(k) {
            for &(j, wj) in graph.out_edges(k) {
                gram[index[&i.0]][index[&j.0]] += wi * wj;
            }
        }
    }
    let coeff: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| gram[i][j] != 0.0)
                .map(|j| (j, damping * gram[i][j]))
                .collect()
        })
        .collect();
    let constant = vec![1.0f64; n];
    let x = linear_fixpoint(&coeff, &constant, tol, 200_000)?;
    Ok(vids.iter().copied().zip(x).collect())
}

/// Walk probability of reaching `source`: deltas flow against the edge
/// direction, so the coefficient of `x_i` in `x_j` is the weight of the
/// edge `j -> i`.
pub fn rooted_pagerank_scores(
    graph: &Graph,
    damping: f64,
    source: VertexId,
    tol: f64,
) -> Result<Vec<(VertexId, f64)>, SimError> {
    let vids = graph.vertices();
    let index: HashMap<u64, usize> = vids.iter().enumerate().map(|(i, v)| (v.0, i)).collect();
    // coeff[i] lists (j, w) pairs: x_i contributes w * x_i to x_j, which
    // for this computation means graph edges j -> i.
    let mut coeff: Vec<Vec<(usize, f64)>> = vec![Vec::new(); vids.len()];
    for (j, i, w) in graph.edges() {
        coeff[index[&i.0]].push((index[&j.0], damping * w));
    }
    let constant: Vec<f64> =
        vids.iter().map(|&v| if v == source { 1.0 } else { 0.0 }).collect();
    let x = linear_fixpoint(&coeff, &constant, tol, 200_000)?;
    Ok(vids.iter().copied().zip(x).collect())
}

/// Direct label-propagation iteration with in-weight normalisation,
/// one-hot injections on `vid mod labels`, run to a fixed point.
pub fn adsorption_direct(
    graph: &Graph,
    labels: usize,
    p_cont: f64,
    p_inj: f64,
    tol: f64,
) -> Result<Vec<(VertexId, Vec<f64>)>, SimError> {
    let vids = graph.vertices();
    let index: HashMap<u64, usize> = vids.iter().enumerate().map(|(i, v)| (v.0, i)).collect();
    let n = vids.len();
    let in_edges = graph.in_edges();
    let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (j, &vid) in vids.iter().enumerate() {
        let sources = &in_edges[&vid];
        let total: f64 = sources.iter().map(|&(_, w)| w).sum();
        for &(src, w) in sources {
            incoming[j].push((index[&src.0], p_cont * w / total));
        }
    }
    let inject: Vec<Vec<f64>> = vids
        .iter()
        .map(|&v| {
            let mut inj = vec![0.0; labels];
            inj[(v.0 % labels as u64) as usize] = p_inj;
            inj
        })
        .collect();

    let mut x = vec![vec![0.0f64; labels]; n];
    for _ in 0..200_000 {
        let mut next = inject.clone();
        for j in 0..n {
            for &(i, w) in &incoming[j] {
                for l in 0..labels {
                    next[j][l] += w * x[i][l];
                }
            }
        }
        let delta: f64 = x
            .iter()
            .zip(&next)
            .map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q).abs()).sum::<f64>())
            .sum();
        x = next;
        if delta < tol {
            return Ok(vids.iter().copied().zip(x).collect());
        }
    }
    Err(SimError::NoConvergence("label propagation not stable".into()))
}

/// Gaussian elimination with partial pivoting.
pub fn gaussian_solve(system: &LinearSystem) -> Result<Vec<f64>, SimError> {
    let (mut a, mut b) = system.dense();
    let n = system.n;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r1, &r2| a[r1][col].abs().total_cmp(&a[r2][col].abs()))
            .expect("non-empty range");
        if a[pivot][col].abs() < 1e-300 {
            return Err(SimError::NoConvergence(format!("singular matrix at column {col}")));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0f64; n];
    for row in (0..n).rev() {
        let mut sum = b[row];
        for k in (row + 1)..n {
            sum -= a[row][k] * x[k];
        }
        x[row] = sum / a[row][row];
    }
    Ok(x)
}

/// Classical pairwise similarity iterated literally on node pairs:
/// diagonal pinned at 1, off-diagonal pairs averaging their in-neighbor
/// pairs scaled by the decay, empty in-neighborhoods scoring 0. Returns
/// the flattened `n * n` matrix in pair-vid order (row-major, 1-based
/// pairs).
pub fn simrank_naive(
    graph: &Graph,
    decay: f64,
    tol: f64,
    max_steps: usize,
) -> Result<Vec<f64>, SimError> {
    let n = graph.vertex_count();
    let contiguous = graph.vertices().iter().enumerate().all(|(i, &v)| v.0 == i as u64 + 1);
    if !contiguous {
        return Err(SimError::Guard("pairwise similarity needs contiguous ids".into()));
    }
    let mut in_sets: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (s, t, _) in graph.edges() {
        in_sets[t.0 as usize - 1].push(s.0 as usize - 1);
    }
    let mut s = vec![0.0f64; n * n];
    for a in 0..n {
        s[a * n + a] = 1.0;
    }
    for _ in 0..max_steps {
        let mut next = vec![0.0f64; n * n];
        for a in 0..n {
            next[a * n + a] = 1.0;
        }
        let mut delta = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                let (ia, ib) = (&in_sets[a], &in_sets[b]);
                let value = if ia.is_empty() || ib.is_empty() {
                    0.0
                } else {
                    let mut sum = 0.0;
                    for &c in ia {
                        for &d in ib {
                            sum += s[c * n + d];
                        }
                    }
                    decay * sum / (ia.len() * ib.len()) as f64
                };
                next[a * n + b] = value;
                delta += (value - s[a * n + b]).abs();
            }
        }
        s = next;
        if delta < tol {
            return Ok(s);
        }
    }
    Err(SimError::NoConvergence(format!("similarity not stable after {max_steps} steps")))
}

/// Ground truth for a run dump: scalar per vertex, or one label vector
/// per vertex.
pub enum OracleResult {
    Scalar(Vec<(VertexId, f64)>),
    Vector(Vec<(VertexId, Vec<f64>)>),
}

/// Solves `spec` on `graph` with the independent method for that
/// algorithm. Pair-valued results (similarity) come back on pair vids.
/// Linear systems go through [`oracle_solve_system`] instead.
pub fn oracle_solve(spec: &AlgorithmSpec, graph: &Graph) -> Result<OracleResult, SimError> {
    let tol = 1e-13 * graph.vertex_count().max(1) as f64;
    match spec.algorithm {
        Algorithm::PageRank => {
            let d = spec.damping.unwrap_or(0.8);
            Ok(OracleResult::Scalar(pagerank_power(graph, d, tol, 200_000)?))
        }
        Algorithm::Sssp => {
            let source = spec.source.ok_or_else(|| SimError::Guard("missing source".into()))?;
            Ok(OracleResult::Scalar(dijkstra(graph, source)))
        }
        Algorithm::ConnectedComponents => Ok(OracleResult::Scalar(union_find_components(graph))),
        Algorithm::Adsorption => {
            let labels = spec.labels.unwrap_or(4).max(1);
            let p_cont = spec.p_cont.unwrap_or(0.85);
            let p_inj = spec.p_inj.unwrap_or(0.15);
            Ok(OracleResult::Vector(adsorption_direct(graph, labels, p_cont, p_inj, tol)?))
        }
        Algorithm::HitsAuthority => {
            let d = spec.damping.unwrap_or(0.8);
            Ok(OracleResult::Scalar(hits_authority_scores(graph, d, tol)?))
        }
        Algorithm::Katz => {
            let beta = spec.beta.unwrap_or(0.05);
            let source = spec.source.ok_or_else(|| SimError::Guard("missing source".into()))?;
            Ok(OracleResult::Scalar(katz_scores(graph, beta, source, tol)?))
        }
        Algorithm::Jacobi => Err(SimError::Guard(
            "linear systems are solved via oracle_solve_system".into(),
        )),
        Algorithm::SimRank => {
            let c = spec.decay.unwrap_or(0.6);
            let n = graph.vertex_count();
            let flat = simrank_naive(graph, c, 1e-13, 100_000)?;
            let scores = (0..n * n)
                .map(|z| (VertexId(z as u64 + 1), flat[z]))
                .collect();
            Ok(OracleResult::Scalar(scores))
        }
        Algorithm::RootedPageRank => {
            let damping = spec.damping.unwrap_or(1.0);
            let source = spec.source.ok_or_else(|| SimError::Guard("missing source".into()))?;
            Ok(OracleResult::Scalar(rooted_pagerank_scores(graph, damping, source, tol)?))
        }
    }
}

/// Direct solution of a linear system, keyed by unknown (1-based vid).
pub fn oracle_solve_system(system: &LinearSystem) -> Result<Vec<(VertexId, f64)>, SimError> {
    let x = gaussian_solve(system)?;
    Ok(x.into_iter().enumerate().map(|(i, v)| (VertexId(i as u64 + 1), v)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::approx_eq_f64;

    #[test]
    fn dijkstra_chain_example() {
        let g = Graph::from_edges([], [(1, 2, 2.5), (2, 3, 1.0)], true).unwrap();
        let d = dijkstra(&g, VertexId(1));
        assert_eq!(d, vec![(VertexId(1), 0.0), (VertexId(2), 2.5), (VertexId(3), 3.5)]);
    }

    #[test]
    fn dijkstra_agrees_with_bellman_ford() {
        let g = crate::graph::generate(&crate::graph::GeneratorConfig {
            node_count: 60,
            degree_mu: 0.5,
            degree_sigma: 1.0,
            weight: Some((0.0, 1.0)),
            seed: 14,
        })
        .unwrap();
        assert_eq!(dijkstra(&g, VertexId(1)), bellman_ford(&g, VertexId(1)));
    }

    #[test]
    fn gaussian_two_by_two() {
        let sys = LinearSystem {
            n: 2,
            entries: vec![(1, 1, 2.0), (1, 2, 1.0), (2, 1, 1.0), (2, 2, 2.0)],
            rhs: vec![3.0, 3.0],
        };
        let x = gaussian_solve(&sys).unwrap();
        assert!(approx_eq_f64(x[0], 1.0, 1e-12));
        assert!(approx_eq_f64(x[1], 1.0, 1e-12));
    }

    #[test]
    fn pagerank_three_cycle_is_uniform() {
        let g = Graph::from_edges([], [(1, 2, 1.0), (2, 3, 1.0), (3, 1, 1.0)], false).unwrap();
        let r = pagerank_power(&g, 0.8, 1e-14, 100_000).unwrap();
        for (_, v) in r {
            assert!(approx_eq_f64(v, 1.0, 1e-9));
        }
    }

    #[test]
    fn union_find_components_on_symmetric_graph() {
        let g = Graph::from_edges(
            [1, 2, 3, 4, 5],
            [(1, 2, 1.0), (2, 1, 1.0), (4, 5, 1.0), (5, 4, 1.0)],
            false,
        )
        .unwrap();
        let c = union_find_components(&g);
        let get = |v: u64| c.iter().find(|&&(x, _)| x == VertexId(v)).unwrap().1;
        assert_eq!(get(1), 2.0);
        assert_eq!(get(2), 2.0);
        assert_eq!(get(3), 3.0);
        assert_eq!(get(4), 5.0);
        assert_eq!(get(5), 5.0);
    }

    #[test]
    fn simrank_identity_diagonal() {
        let g = Graph::from_edges([], [(1, 3, 1.0), (2, 3, 1.0)], false).unwrap();
        let s = simrank_naive(&g, 0.6, 1e-13, 10_000).unwrap();
        let n = 3;
        for a in 0..n {
            assert_eq!(s[a * n + a], 1.0);
        }
        // Vertices 1 and 2 have no in-neighbors: similarity 0.
        assert_eq!(s[1], 0.0);
        // Pair (3,3) is the only in-neighbor pair of (a=1,b=2) ... none;
        // but s(1,2)=0 while s(3,3)=1 feeds nothing off-diagonal here.
        assert_eq!(s[2 * n], 0.0);
    }
}
