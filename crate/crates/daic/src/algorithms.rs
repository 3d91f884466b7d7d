//! Ready-made kernels and the graph transforms some of them need.
//!
//! Each constructor returns a [`Kernel`] and, where the computation runs
//! on a derived structure (reversed edges, node-pair graph, co-citation
//! matrix, linear system), the execution graph to run it on. Receiver-side
//! constants are folded into the execution graph's edge weights at build
//! time so the per-edge function stays a pure function of the sender.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{Graph, GraphBuilder, VertexId};
use crate::kernel::{Direction, Kernel, LabelVec};

#[derive(Debug, Error)]
pub enum AlgoError {
    #[error("unknown algorithm {0:?}")]
    UnknownAlgorithm(String),
    #[error("{algorithm} requires parameter {param}")]
    MissingParam { algorithm: &'static str, param: &'static str },
    #[error("parameter {param} out of range: {msg}")]
    BadParam { param: &'static str, msg: String },
    #[error("source vertex {0} is not in the graph")]
    SourceMissing(VertexId),
    #[error("{what} exceeds the size guard: {actual} > {limit}")]
    SizeGuard { what: &'static str, limit: usize, actual: usize },
    #[error("zero or missing diagonal in row {row}")]
    ZeroDiagonal { row: usize },
    #[error("vertex ids must be contiguous 1..=n for {0}")]
    NonContiguousIds(&'static str),
    #[error("{path}:{line}: {msg}")]
    SystemParse { path: String, line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The algorithms the command-line surface can name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    PageRank,
    Sssp,
    ConnectedComponents,
    Adsorption,
    HitsAuthority,
    Katz,
    Jacobi,
    SimRank,
    RootedPageRank,
}

impl Algorithm {
    pub const ALL: [Algorithm; 9] = [
        Algorithm::PageRank,
        Algorithm::Sssp,
        Algorithm::ConnectedComponents,
        Algorithm::Adsorption,
        Algorithm::HitsAuthority,
        Algorithm::Katz,
        Algorithm::Jacobi,
        Algorithm::SimRank,
        Algorithm::RootedPageRank,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::PageRank => "pagerank",
            Algorithm::Sssp => "sssp",
            Algorithm::ConnectedComponents => "connected_components",
            Algorithm::Adsorption => "adsorption",
            Algorithm::HitsAuthority => "hits_authority",
            Algorithm::Katz => "katz",
            Algorithm::Jacobi => "jacobi",
            Algorithm::SimRank => "simrank",
            Algorithm::RootedPageRank => "rooted_pagerank",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = AlgoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| AlgoError::UnknownAlgorithm(s.to_string()))
    }
}

/// An algorithm choice plus its parameters. Unset parameters fall back
/// to documented defaults when the kernel is built.
#[derive(Debug, Clone)]
pub struct AlgorithmSpec {
    pub algorithm: Algorithm,
    /// Damping factor for pagerank / hits_authority (default 0.8) and
    /// rooted_pagerank (default 1.0, the undamped literal form).
    pub damping: Option<f64>,
    /// Path attenuation for katz (default 0.05). Convergence requires
    /// beta below the reciprocal spectral radius; not verified here.
    pub beta: Option<f64>,
    /// Similarity decay for simrank, in (0, 1) (default 0.6).
    pub decay: Option<f64>,
    /// Source vertex for sssp / katz / rooted_pagerank.
    pub source: Option<VertexId>,
    /// Label count for adsorption (default 4).
    pub labels: Option<usize>,
    /// Continuation and injection probabilities for adsorption
    /// (defaults 0.85 / 0.15).
    pub p_cont: Option<f64>,
    pub p_inj: Option<f64>,
    /// Node-count guard for the similarity pair graph (default 2000).
    pub pair_limit: Option<usize>,
}

impl AlgorithmSpec {
    pub fn new(algorithm: Algorithm) -> Self {
        AlgorithmSpec {
            algorithm,
            damping: None,
            beta: None,
            decay: None,
            source: None,
            labels: None,
            p_cont: None,
            p_inj: None,
            pair_limit: None,
        }
    }
}

/// A kernel paired with the graph it executes on. Vector-valued kernels
/// get their own variant because their value type differs.
pub enum Built {
    Scalar { graph: Graph, kernel: Kernel<f64>, pairs: Option<PairIndex> },
    Vector { graph: Graph, kernel: Kernel<LabelVec> },
}

/// Builds the kernel named by `spec` for `graph`. Jacobi runs on a
/// linear system instead of a graph; see [`build_jacobi`].
pub fn build(spec: &AlgorithmSpec, graph: &Graph) -> Result<Built, AlgoError> {
    let unit = |x: f64, param: &'static str| -> Result<f64, AlgoError> {
        if x > 0.0 && x < 1.0 {
            Ok(x)
        } else {
            Err(AlgoError::BadParam { param, msg: format!("{x} not in (0, 1)") })
        }
    };
    let source = |param: &'static str| -> Result<VertexId, AlgoError> {
        let s = spec.source.ok_or(AlgoError::MissingParam {
            algorithm: spec.algorithm.name(),
            param,
        })?;
        if !graph.contains(s) {
            return Err(AlgoError::SourceMissing(s));
        }
        Ok(s)
    };
    match spec.algorithm {
        Algorithm::PageRank => {
            let d = unit(spec.damping.unwrap_or(0.8), "damping")?;
            Ok(Built::Scalar { graph: graph.clone(), kernel: pagerank_kernel(d), pairs: None })
        }
        Algorithm::Sssp => {
            let s = source("source")?;
            Ok(Built::Scalar { graph: graph.clone(), kernel: sssp_kernel(s), pairs: None })
        }
        Algorithm::ConnectedComponents => Ok(Built::Scalar {
            graph: graph.clone(),
            kernel: connected_components_kernel(),
            pairs: None,
        }),
        Algorithm::Adsorption => {
            let labels = spec.labels.unwrap_or(4).max(1);
            let p_cont = unit(spec.p_cont.unwrap_or(0.85), "p_cont")?;
            let p_inj = spec.p_inj.unwrap_or(0.15);
            let (exec, kernel) = adsorption_kernel(graph, labels, p_cont, p_inj);
            Ok(Built::Vector { graph: exec, kernel })
        }
        Algorithm::HitsAuthority => {
            let d = unit(spec.damping.unwrap_or(0.8), "damping")?;
            let (exec, kernel) = hits_authority_kernel(graph, d)?;
            Ok(Built::Scalar { graph: exec, kernel, pairs: None })
        }
        Algorithm::Katz => {
            let beta = spec.beta.unwrap_or(0.05);
            if beta <= 0.0 {
                return Err(AlgoError::BadParam { param: "beta", msg: format!("{beta} <= 0") });
            }
            let s = source("source")?;
            Ok(Built::Scalar { graph: graph.clone(), kernel: katz_kernel(beta, s), pairs: None })
        }
        Algorithm::Jacobi => Err(AlgoError::MissingParam {
            algorithm: "jacobi",
            param: "linear system (use build_jacobi)",
        }),
        Algorithm::SimRank => {
            let c = unit(spec.decay.unwrap_or(0.6), "decay")?;
            let limit = spec.pair_limit.unwrap_or(DEFAULT_PAIR_LIMIT);
            let (exec, kernel, pairs) = simrank_kernel(graph, c, limit)?;
            Ok(Built::Scalar { graph: exec, kernel, pairs: Some(pairs) })
        }
        Algorithm::RootedPageRank => {
            let damping = spec.damping.unwrap_or(1.0);
            if damping <= 0.0 || damping > 1.0 {
                return Err(AlgoError::BadParam {
                    param: "damping",
                    msg: format!("{damping} not in (0, 1]"),
                });
            }
            let s = source("source")?;
            let (exec, kernel) = rooted_pagerank_kernel(graph, s, damping);
            Ok(Built::Scalar { graph: exec, kernel, pairs: None })
        }
    }
}

/// Builds the Jacobi kernel and its execution graph from a linear system.
pub fn build_jacobi(system: &LinearSystem) -> Result<Built, AlgoError> {
    let (graph, kernel) = jacobi_kernel(system)?;
    Ok(Built::Scalar { graph, kernel, pairs: None })
}

/// Ranking scores spread along out-edges, scaled by the damping factor
/// and the sender's out-degree; every vertex injects `1 - d`.
pub fn pagerank_kernel(damping: f64) -> Kernel<f64> {
    Kernel::new(
        "pagerank",
        Direction::Increasing,
        0.0,
        |a, b| a + b,
        move |ctx, x| damping * x / ctx.source_data.out_degree() as f64,
        move |_, _| (0.0, 1.0 - damping),
        |v| *v,
        |rng| rng.random_range(0.0..1.0),
    )
}

/// Single-source shortest paths: candidates are `distance + weight`,
/// folded with `min`; infinity is the identity and marks unreached
/// vertices (its progress contribution is zero).
pub fn sssp_kernel(source: VertexId) -> Kernel<f64> {
    Kernel::new(
        "sssp",
        Direction::Decreasing,
        f64::INFINITY,
        |a, b| a.min(*b),
        |ctx, x| x + ctx.weight,
        move |vid, _| (f64::INFINITY, if vid == source { 0.0 } else { f64::INFINITY }),
        |v| if v.is_finite() { *v } else { 0.0 },
        |rng| {
            if rng.random_range(0..10) == 0 {
                f64::INFINITY
            } else {
                rng.random_range(0.0..100.0)
            }
        },
    )
    .idempotent()
}

/// Propagates the largest vertex id seen so far along out-edges. On a
/// symmetric graph every member of a connected component converges to
/// the component's maximum id; on an asymmetric graph vertex `j` ends at
/// the largest id that can reach `j` forwards (including `j` itself).
pub fn connected_components_kernel() -> Kernel<f64> {
    Kernel::new(
        "connected_components",
        Direction::Increasing,
        f64::NEG_INFINITY,
        |a, b| a.max(*b),
        |_, x| *x,
        |vid, _| (-1.0, vid.0 as f64),
        |v| if v.is_finite() { *v } else { 0.0 },
        |rng| {
            if rng.random_range(0..10) == 0 {
                -1.0
            } else {
                rng.random_range(1..1_000_000) as f64
            }
        },
    )
    .idempotent()
}

/// Label propagation with per-vertex continuation and injection weights.
/// The receiver's continuation probability and the in-weight
/// normalisation (column sums of the adjacency equal one) are folded
/// into the execution graph's edge weights; each vertex injects
/// `p_inj` on the label `vid mod labels`.
pub fn adsorption_kernel(
    graph: &Graph,
    labels: usize,
    p_cont: f64,
    p_inj: f64,
) -> (Graph, Kernel<LabelVec>) {
    let in_edges = graph.in_edges();
    let mut builder = GraphBuilder::new(true);
    for &v in graph.vertices() {
        builder.ensure_vertex(v);
    }
    for (&dst, sources) in in_edges.iter() {
        let total: f64 = sources.iter().map(|&(_, w)| w).sum();
        for &(src, w) in sources {
            builder.add_edge_unchecked(src, dst, p_cont * w / total);
        }
    }
    let exec = builder.build();
    let zero = LabelVec::zeros(labels);
    let kernel = Kernel::new(
        "adsorption",
        Direction::Increasing,
        zero,
        |a: &LabelVec, b: &LabelVec| a.add(b),
        |ctx, x: &LabelVec| x.scale(ctx.weight),
        move |vid, _| {
            let mut inject = LabelVec::zeros(labels);
            inject.0[(vid.0 % labels as u64) as usize] = p_inj;
            (LabelVec::zeros(labels), inject)
        },
        |v: &LabelVec| v.sum(),
        move |rng| LabelVec((0..labels).map(|_| rng.random_range(0.0..1.0)).collect()),
    );
    (exec, kernel)
}

/// Authority scores on the co-citation structure: the execution graph
/// carries one edge `i -> j` weighted by the number of common citing
/// vertices (sum of weight products), i.e. the Gram matrix of the input
/// adjacency. Every vertex injects 1.
pub fn hits_authority_kernel(
    graph: &Graph,
    damping: f64,
) -> Result<(Graph, Kernel<f64>), AlgoError> {
    let work: usize = graph.vertices().iter().map(|&v| graph.out_degree(v).pow(2)).sum();
    const HITS_GUARD: usize = 4_000_000;
    if work > HITS_GUARD {
        return Err(AlgoError::SizeGuard {
            what: "co-citation materialisation",
            limit: HITS_GUARD,
            actual: work,
        });
    }
    let mut gram: BTreeMap<(u64, u64), f64> = BTreeMap::new();
    for &k in graph.vertices() {
        for &(i, wi) in graph.out_edges(k) {
            for &(j, wj) in graph.out_edges(k) {
                *gram.entry((i.0, j.0)).or_insert(0.0) += wi * wj;
            }
        }
    }
    let mut builder = GraphBuilder::new(true);
    for &v in graph.vertices() {
        builder.ensure_vertex(v);
    }
    for ((i, j), w) in gram {
        builder.add_edge_unchecked(VertexId(i), VertexId(j), w);
    }
    let exec = builder.build();
    let kernel = Kernel::new(
        "hits_authority",
        Direction::Increasing,
        0.0,
        |a, b| a + b,
        move |ctx, x| damping * ctx.weight * x,
        |_, _| (0.0, 1.0),
        |v| *v,
        |rng| rng.random_range(0.0..1.0),
    );
    Ok((exec, kernel))
}

/// Path-counting proximity from a source, attenuated by `beta` per hop.
pub fn katz_kernel(beta: f64, source: VertexId) -> Kernel<f64> {
    Kernel::new(
        "katz",
        Direction::Increasing,
        0.0,
        |a, b| a + b,
        move |ctx, x| beta * ctx.weight * x,
        move |vid, _| (0.0, if vid == source { 1.0 } else { 0.0 }),
        |v| *v,
        |rng| rng.random_range(0.0..1.0),
    )
}

/// Random-walk proximity towards `source`: deltas flow along reversed
/// edges. The undamped literal form (`damping = 1`) diverges on cyclic
/// graphs; the update-count guard converts that into a clean failure.
pub fn rooted_pagerank_kernel(
    graph: &Graph,
    source: VertexId,
    damping: f64,
) -> (Graph, Kernel<f64>) {
    let exec = graph.reversed();
    let kernel = Kernel::new(
        "rooted_pagerank",
        Direction::Increasing,
        0.0,
        |a, b| a + b,
        move |ctx, x| damping * ctx.weight * x,
        move |vid, _| (0.0, if vid == source { 1.0 } else { 0.0 }),
        |v| *v,
        |rng| rng.random_range(0.0..1.0),
    );
    (exec, kernel)
}

/// Unit-delta counter: every vertex starts with delta 1 and forwards
/// deltas unchanged along every out-edge. At quiescence each vertex
/// value equals the number of paths into it (plus one for itself),
/// which makes the kernel an exact-integer probe for message loss,
/// duplication, and snapshot consistency.
pub fn counting_kernel() -> Kernel<i64> {
    Kernel::new(
        "counting",
        Direction::Increasing,
        0i64,
        |a, b| a + b,
        |_, x| *x,
        |_, _| (0, 1),
        |v| *v as f64,
        |rng| rng.random_range(0..1_000),
    )
}

// ---------------------------------------------------------------------
// Linear systems (Jacobi)
// ---------------------------------------------------------------------

/// Sparse square system `A x = b` with 1-based indices.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub n: usize,
    /// `(row, col, value)` triples; at most one entry per position.
    pub entries: Vec<(usize, usize, f64)>,
    pub rhs: Vec<f64>,
}

impl LinearSystem {
    /// The diagonal by row, failing on a zero or absent entry.
    pub fn diagonal(&self) -> Result<Vec<f64>, AlgoError> {
        let mut diag = vec![0.0; self.n];
        for &(r, c, v) in &self.entries {
            if r == c {
                diag[r - 1] = v;
            }
        }
        for (i, &d) in diag.iter().enumerate() {
            if d == 0.0 {
                return Err(AlgoError::ZeroDiagonal { row: i + 1 });
            }
        }
        Ok(diag)
    }

    /// Dense `(matrix, rhs)` copy for direct solvers.
    pub fn dense(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut m = vec![vec![0.0; self.n]; self.n];
        for &(r, c, v) in &self.entries {
            m[r - 1][c - 1] = v;
        }
        (m, self.rhs.clone())
    }

    /// Seeded random system with rows dominated by their diagonal, so
    /// fixed-point iteration is guaranteed to converge.
    pub fn random_diagonally_dominant(n: usize, seed: u64) -> LinearSystem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut entries = Vec::new();
        let mut rhs = Vec::new();
        for r in 1..=n {
            let mut off_sum = 0.0;
            for c in 1..=n {
                if c != r && rng.random_range(0..4) == 0 {
                    let v: f64 = rng.random_range(-1.0..1.0);
                    off_sum += v.abs();
                    entries.push((r, c, v));
                }
            }
            let sign = if rng.random_range(0..2) == 0 { 1.0 } else { -1.0 };
            entries.push((r, r, sign * (off_sum + rng.random_range(1.0..2.0))));
            rhs.push(rng.random_range(-5.0..5.0));
        }
        LinearSystem { n, entries, rhs }
    }
}

/// Encodes the system as the iteration graph: one vertex per unknown,
/// one edge `i -> j` with weight `-A[j][i] / A[j][j]` per off-diagonal
/// nonzero.
pub fn jacobi_to_graph(system: &LinearSystem) -> Result<Graph, AlgoError> {
    let diag = system.diagonal()?;
    let mut builder = GraphBuilder::new(true);
    for v in 1..=system.n {
        builder.ensure_vertex(VertexId(v as u64));
    }
    for &(r, c, v) in &system.entries {
        if r != c && v != 0.0 {
            builder
                .add_edge(VertexId(c as u64), VertexId(r as u64), -v / diag[r - 1])
                .map_err(|_| AlgoError::BadParam {
                    param: "entries",
                    msg: format!("duplicate matrix entry at ({r}, {c})"),
                })?;
        }
    }
    Ok(builder.build())
}

/// Jacobi iteration as a kernel: deltas scaled by the (pre-divided)
/// edge weights with every unknown injecting `b_j / A_jj`. Convergence
/// requires spectral radius below one (e.g. diagonally dominant
/// systems); this is a documented precondition, not checked. Deltas
/// carry mixed signs, so the progress metric is not monotone.
pub fn jacobi_kernel(system: &LinearSystem) -> Result<(Graph, Kernel<f64>), AlgoError> {
    let graph = jacobi_to_graph(system)?;
    let diag = system.diagonal()?;
    let start: Vec<f64> = system.rhs.iter().zip(&diag).map(|(b, d)| b / d).collect();
    let kernel = Kernel::new(
        "jacobi",
        Direction::Increasing,
        0.0,
        |a, b| a + b,
        |ctx, x| ctx.weight * x,
        move |vid, _| (0.0, start[(vid.0 - 1) as usize]),
        |v| *v,
        |rng| rng.random_range(-1.0..1.0),
    )
    .non_monotone();
    Ok((graph, kernel))
}

/// Loads a system from a `row col value` triple file plus a right-hand
/// side file with one value per line. Lines starting with `%` are
/// comments.
pub fn load_linear_system(
    matrix_path: impl AsRef<Path>,
    rhs_path: impl AsRef<Path>,
) -> Result<LinearSystem, AlgoError> {
    let mpath = matrix_path.as_ref().display().to_string();
    let text = std::fs::read_to_string(&matrix_path)?;
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    let mut n = 0usize;
    let mut seen = std::collections::HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let err =
            |msg: String| AlgoError::SystemParse { path: mpath.clone(), line: idx + 1, msg };
        let mut it = line.split_whitespace();
        let mut field = |name: &'static str| {
            it.next().ok_or_else(|| err(format!("missing {name}"))).map(str::to_string)
        };
        let r: usize = field("row")?.parse().map_err(|e| err(format!("bad row: {e}")))?;
        let c: usize = field("col")?.parse().map_err(|e| err(format!("bad col: {e}")))?;
        let v: f64 = field("value")?.parse().map_err(|e| err(format!("bad value: {e}")))?;
        if r == 0 || c == 0 {
            return Err(err("indices are 1-based".into()));
        }
        if !v.is_finite() {
            return Err(err(format!("non-finite value {v}")));
        }
        if !seen.insert((r, c)) {
            return Err(err(format!("duplicate entry ({r}, {c})")));
        }
        n = n.max(r).max(c);
        entries.push((r, c, v));
    }

    let rpath = rhs_path.as_ref().display().to_string();
    let text = std::fs::read_to_string(&rhs_path)?;
    let mut rhs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let v: f64 = line.parse().map_err(|e| AlgoError::SystemParse {
            path: rpath.clone(),
            line: idx + 1,
            msg: format!("bad value: {e}"),
        })?;
        rhs.push(v);
    }
    if rhs.len() < n {
        return Err(AlgoError::BadParam {
            param: "rhs",
            msg: format!("{} values for {} unknowns", rhs.len(), n),
        });
    }
    let n = n.max(rhs.len());
    Ok(LinearSystem { n, entries, rhs })
}

// ---------------------------------------------------------------------
// Node-pair graph (similarity)
// ---------------------------------------------------------------------

pub const DEFAULT_PAIR_LIMIT: usize = 2000;

/// Maps ordered vertex pairs of an `n`-vertex graph (ids `1..=n`) onto
/// pair vertex ids `1..=n^2`.
#[derive(Debug, Clone, Copy)]
pub struct PairIndex {
    n: u64,
}

impl PairIndex {
    pub fn new(n: usize) -> Self {
        PairIndex { n: n as u64 }
    }

    pub fn vid(&self, a: VertexId, b: VertexId) -> VertexId {
        VertexId((a.0 - 1) * self.n + b.0)
    }

    pub fn unpack(&self, pair: VertexId) -> (VertexId, VertexId) {
        let z = pair.0 - 1;
        (VertexId(z / self.n + 1), VertexId(z % self.n + 1))
    }

    pub fn base_len(&self) -> usize {
        self.n as usize
    }
}

fn require_contiguous(graph: &Graph, what: &'static str) -> Result<usize, AlgoError> {
    let n = graph.vertex_count();
    let contiguous =
        graph.vertices().iter().enumerate().all(|(i, &v)| v.0 == i as u64 + 1);
    if !contiguous {
        return Err(AlgoError::NonContiguousIds(what));
    }
    Ok(n)
}

/// Builds the pair graph: vertex `ab` for every ordered pair, and an
/// edge `ab -> cd` exactly when `a -> c` and `b -> d` are edges of the
/// input. Guarded because the result has `n^2` vertices.
pub fn build_nodepair_graph(
    graph: &Graph,
    max_nodes: usize,
) -> Result<(Graph, PairIndex), AlgoError> {
    let n = require_contiguous(graph, "node-pair graph")?;
    if n > max_nodes {
        return Err(AlgoError::SizeGuard { what: "node-pair graph", limit: max_nodes, actual: n });
    }
    let pairs = PairIndex::new(n);
    let mut builder = GraphBuilder::new(false);
    for a in 1..=n as u64 {
        for b in 1..=n as u64 {
            builder.ensure_vertex(pairs.vid(VertexId(a), VertexId(b)));
        }
    }
    for &a in graph.vertices() {
        for &(c, _) in graph.out_edges(a) {
            for &b in graph.vertices() {
                for &(d, _) in graph.out_edges(b) {
                    builder.add_edge_unchecked(pairs.vid(a, b), pairs.vid(c, d), 1.0);
                }
            }
        }
    }
    Ok((builder.build(), pairs))
}

/// Pairwise similarity on the node-pair graph. Diagonal pairs are
/// pinned at similarity 1 and act as constant sources: the execution
/// graph connects off-diagonal pairs only (edges touching a diagonal
/// pair are dropped), and the diagonal's steady influence appears as
/// each off-diagonal pair's initial delta
/// `C * |I(a) n I(b)| / (|I(a)| * |I(b)|)` — one classical step applied
/// to the identity start. This is the initialisation that reproduces
/// classical pairwise similarity; the naive iteration oracle pins it
/// down.
pub fn simrank_kernel(
    graph: &Graph,
    decay: f64,
    max_nodes: usize,
) -> Result<(Graph, Kernel<f64>, PairIndex), AlgoError> {
    let n = require_contiguous(graph, "similarity pair graph")?;
    if n > max_nodes {
        return Err(AlgoError::SizeGuard {
            what: "similarity pair graph",
            limit: max_nodes,
            actual: n,
        });
    }
    let pairs = PairIndex::new(n);

    // Sorted in-neighbor sets of the base graph.
    let mut in_sets: Vec<Vec<u64>> = vec![Vec::new(); n + 1];
    for (src, dst, _) in graph.edges() {
        in_sets[dst.0 as usize].push(src.0);
    }
    for set in &mut in_sets {
        set.sort_unstable();
    }
    let intersection = |a: &[u64], b: &[u64]| -> usize {
        let (mut i, mut j, mut count) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    count += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        count
    };

    let mut builder = GraphBuilder::new(true);
    let mut start = vec![0.0f64; n * n + 1];
    for a in 1..=n as u64 {
        for b in 1..=n as u64 {
            let pair = pairs.vid(VertexId(a), VertexId(b));
            builder.ensure_vertex(pair);
            let (ia, ib) = (&in_sets[a as usize], &in_sets[b as usize]);
            if a != b && !ia.is_empty() && !ib.is_empty() {
                start[pair.0 as usize] =
                    decay * intersection(ia, ib) as f64 / (ia.len() * ib.len()) as f64;
                let w = decay / (ia.len() * ib.len()) as f64;
                for &c in ia.iter() {
                    for &d in ib.iter() {
                        if c != d {
                            builder.add_edge_unchecked(
                                pairs.vid(VertexId(c), VertexId(d)),
                                pair,
                                w,
                            );
                        }
                    }
                }
            }
        }
    }
    let exec = builder.build();
    let n_u64 = n as u64;
    let kernel = Kernel::new(
        "simrank",
        Direction::Increasing,
        0.0,
        |a, b| a + b,
        |ctx, x| ctx.weight * x,
        move |vid, _| {
            let z = vid.0 - 1;
            let diagonal = z / n_u64 == z % n_u64;
            if diagonal {
                (1.0, 0.0)
            } else {
                (0.0, start[vid.0 as usize])
            }
        },
        |v| *v,
        |rng| rng.random_range(0.0..1.0),
    );
    Ok((exec, kernel, pairs))
}
