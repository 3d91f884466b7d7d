//! Directed graph representation, text format, partitioning, and
//! synthetic generation.
//!
//! The text format is one vertex per line: the vertex id, a tab, then a
//! space-separated adjacency list. Each adjacency token is either a bare
//! target id (weight defaults to 1.0) or `target:weight`. A line with no
//! adjacency (`5\t` or just `5`) declares a sink vertex. Targets that
//! never appear at the head of a line become sink vertices implicitly.
//!
//! Generated graphs draw per-node in-degrees from a log-normal
//! distribution and pick the sources of each node's in-edges uniformly
//! without replacement. Generation is fully determined by the seed: the
//! generator is ChaCha8 (via `rand_chacha`), in-degrees are rounded
//! half-up, and edge weights, when enabled, are log-normal as well.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use thiserror::Error;

/// Globally unique vertex identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId(pub u64);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<u64> for VertexId {
    fn from(v: u64) -> Self {
        VertexId(v)
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("shard count must be at least 1")]
    ZeroShards,
    #[error("duplicate edge {src} -> {dst}")]
    DuplicateEdge { src: VertexId, dst: VertexId },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Directed graph with per-edge weights. Immutable once built; cheap to
/// share across threads behind an `Arc`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    vids: Vec<VertexId>,
    index: HashMap<u64, usize>,
    adjacency: Vec<Vec<(VertexId, f64)>>,
    weighted: bool,
}

impl Graph {
    pub fn vertex_count(&self) -> usize {
        self.vids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    pub fn is_weighted(&self) -> bool {
        self.weighted
    }

    /// Vertex ids in ascending order.
    pub fn vertices(&self) -> &[VertexId] {
        &self.vids
    }

    pub fn contains(&self, vid: VertexId) -> bool {
        self.index.contains_key(&vid.0)
    }

    /// Out-edges of `vid` in storage order. Empty for unknown vertices.
    pub fn out_edges(&self, vid: VertexId) -> &[(VertexId, f64)] {
        match self.index.get(&vid.0) {
            Some(&i) => &self.adjacency[i],
            None => &[],
        }
    }

    pub fn out_degree(&self, vid: VertexId) -> usize {
        self.out_edges(vid).len()
    }

    /// All edges as `(source, target, weight)` triples, sources ascending.
    pub fn edges(&self) -> impl Iterator<Item = (VertexId, VertexId, f64)> + '_ {
        self.vids.iter().enumerate().flat_map(move |(i, &src)| {
            self.adjacency[i].iter().map(move |&(dst, w)| (src, dst, w))
        })
    }

    /// In-neighbor lists keyed the same way as [`Graph::vertices`].
    pub fn in_edges(&self) -> HashMap<VertexId, Vec<(VertexId, f64)>> {
        let mut map: HashMap<VertexId, Vec<(VertexId, f64)>> =
            self.vids.iter().map(|&v| (v, Vec::new())).collect();
        for (src, dst, w) in self.edges() {
            map.get_mut(&dst).expect("edge target is a vertex").push((src, w));
        }
        map
    }

    /// The graph with every edge direction flipped, weights preserved.
    pub fn reversed(&self) -> Graph {
        let mut builder = GraphBuilder::new(self.weighted);
        for &v in &self.vids {
            builder.ensure_vertex(v);
        }
        for (src, dst, w) in self.edges() {
            builder.add_edge(dst, src, w).expect("reversal cannot duplicate edges");
        }
        builder.build()
    }

    /// Renders the canonical text form: one line per vertex in ascending
    /// vid order. `parse` of the result reproduces the graph exactly.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, vid) in self.vids.iter().enumerate() {
            out.push_str(&vid.0.to_string());
            out.push('\t');
            let mut first = true;
            for &(dst, w) in &self.adjacency[i] {
                if !first {
                    out.push(' ');
                }
                first = false;
                if self.weighted {
                    out.push_str(&format!("{}:{:?}", dst.0, w));
                } else {
                    out.push_str(&dst.0.to_string());
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Graph, GraphError> {
        let mut builder = GraphBuilder::new(false);
        let mut seen_sources: HashSet<u64> = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            if raw.is_empty() {
                continue;
            }
            let (vid, adjacency, weighted) = parse_line(raw, line_no)?;
            if !seen_sources.insert(vid.0) {
                return Err(GraphError::Parse {
                    line: line_no,
                    msg: format!("vertex {vid} defined twice"),
                });
            }
            if weighted {
                builder.weighted = true;
            }
            builder.ensure_vertex(vid);
            for (dst, w) in adjacency {
                builder.ensure_vertex(dst);
                builder.add_edge(vid, dst, w).map_err(|e| GraphError::Parse {
                    line: line_no,
                    msg: e.to_string(),
                })?;
            }
        }
        Ok(builder.build())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Graph, GraphError> {
        let text = std::fs::read_to_string(path)?;
        Graph::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GraphError> {
        std::fs::write(path, self.render())?;
        Ok(())
    }

    /// Builds a graph from explicit edges; vertices are the union of the
    /// given vertex list and every edge endpoint.
    pub fn from_edges(
        vertices: impl IntoIterator<Item = u64>,
        edges: impl IntoIterator<Item = (u64, u64, f64)>,
        weighted: bool,
    ) -> Result<Graph, GraphError> {
        let mut builder = GraphBuilder::new(weighted);
        for v in vertices {
            builder.ensure_vertex(VertexId(v));
        }
        for (s, t, w) in edges {
            builder.ensure_vertex(VertexId(s));
            builder.ensure_vertex(VertexId(t));
            builder.add_edge(VertexId(s), VertexId(t), w)?;
        }
        Ok(builder.build())
    }
}

/// Incremental construction; `build` freezes into an immutable [`Graph`].
#[derive(Debug, Default)]
pub struct GraphBuilder {
    adjacency: std::collections::BTreeMap<u64, Vec<(VertexId, f64)>>,
    weighted: bool,
}

impl GraphBuilder {
    pub fn new(weighted: bool) -> Self {
        GraphBuilder { adjacency: Default::default(), weighted }
    }

    pub fn ensure_vertex(&mut self, vid: VertexId) {
        self.adjacency.entry(vid.0).or_default();
    }

    /// Rejects duplicate `(src, dst)` pairs; adjacency lists stay
    /// duplicate-free by construction.
    pub fn add_edge(&mut self, src: VertexId, dst: VertexId, weight: f64) -> Result<(), GraphError> {
        self.ensure_vertex(dst);
        let list = self.adjacency.entry(src.0).or_default();
        if list.iter().any(|&(t, _)| t == dst) {
            return Err(GraphError::DuplicateEdge { src, dst });
        }
        list.push((dst, weight));
        Ok(())
    }

    /// Inserts without the duplicate scan. For bulk transforms whose
    /// construction cannot repeat a `(src, dst)` pair.
    pub fn add_edge_unchecked(&mut self, src: VertexId, dst: VertexId, weight: f64) {
        self.ensure_vertex(dst);
        self.adjacency.entry(src.0).or_default().push((dst, weight));
    }

    pub fn build(self) -> Graph {
        let mut vids = Vec::with_capacity(self.adjacency.len());
        let mut adjacency = Vec::with_capacity(self.adjacency.len());
        for (vid, list) in self.adjacency {
            vids.push(VertexId(vid));
            adjacency.push(list);
        }
        let index = vids.iter().enumerate().map(|(i, v)| (v.0, i)).collect();
        // Canonical flag: weights are rendered iff the graph has edges and
        // was declared weighted, or some weight deviates from the 1.0
        // default (rendering those bare would lose data).
        let has_edges = adjacency.iter().any(|l| !l.is_empty());
        let any_nonunit = adjacency.iter().flatten().any(|&(_, w)| w != 1.0);
        let weighted = (self.weighted && has_edges) || any_nonunit;
        Graph { vids, index, adjacency, weighted }
    }
}

/// Parses one input line into a vertex id and its out-edge list (input
/// order preserved). The third result reports whether any token carried
/// an explicit weight.
pub fn parse_line(
    line: &str,
    line_no: usize,
) -> Result<(VertexId, Vec<(VertexId, f64)>, bool), GraphError> {
    let err = |msg: String| GraphError::Parse { line: line_no, msg };
    let (head, rest) = match line.split_once('\t') {
        Some((head, rest)) => (head, rest),
        None => (line, ""),
    };
    let vid = head
        .parse::<u64>()
        .map(VertexId)
        .map_err(|_| err(format!("malformed vertex id {head:?} (expected a non-negative integer)")))?;
    let mut adjacency = Vec::new();
    let mut seen = HashSet::new();
    let mut weighted = false;
    for token in rest.split_whitespace() {
        let (target_text, weight) = match token.split_once(':') {
            Some((t, w)) => {
                weighted = true;
                let weight = w
                    .parse::<f64>()
                    .map_err(|_| err(format!("malformed weight {w:?} in token {token:?}")))?;
                if !weight.is_finite() {
                    return Err(err(format!("non-finite weight in token {token:?}")));
                }
                (t, weight)
            }
            None => (token, 1.0),
        };
        let target = target_text.parse::<u64>().map(VertexId).map_err(|_| {
            err(format!("malformed target id {target_text:?} in token {token:?}"))
        })?;
        if !seen.insert(target.0) {
            return Err(err(format!("duplicate target {target} in adjacency list")));
        }
        adjacency.push((target, weight));
    }
    Ok((vid, adjacency, weighted))
}

/// Maps a vertex to its owning worker: `vid mod shards`. Total and
/// stable; the same vid with the same shard count always lands on the
/// same worker.
pub fn partition(vid: VertexId, shards: usize) -> Result<usize, GraphError> {
    if shards == 0 {
        return Err(GraphError::ZeroShards);
    }
    Ok((vid.0 % shards as u64) as usize)
}

/// Parameters for synthetic log-normal graph generation.
#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    pub node_count: u64,
    pub degree_mu: f64,
    pub degree_sigma: f64,
    /// Log-normal `(mu, sigma)` for edge weights; `None` produces an
    /// unweighted graph.
    pub weight: Option<(f64, f64)>,
    pub seed: u64,
}

impl GeneratorConfig {
    fn validate(&self) -> Result<(), GraphError> {
        if self.node_count < 1 {
            return Err(GraphError::Config("node_count must be >= 1".into()));
        }
        if !(self.degree_sigma > 0.0) {
            return Err(GraphError::Config("degree_sigma must be > 0".into()));
        }
        if let Some((_, sigma)) = self.weight {
            if !(sigma > 0.0) {
                return Err(GraphError::Config("weight_sigma must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Generates a directed graph with vertex ids `1..=node_count`. Each
/// node's in-degree is a log-normal draw rounded half-up and clamped to
/// `[0, node_count-1]`; the sources of its in-edges are distinct uniform
/// picks excluding the node itself (no self-loops). Identical seeds
/// produce byte-identical graphs.
pub fn generate(config: &GeneratorConfig) -> Result<Graph, GraphError> {
    config.validate()?;
    let n = config.node_count;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let degree_dist = LogNormal::new(config.degree_mu, config.degree_sigma)
        .map_err(|e| GraphError::Config(e.to_string()))?;
    let weight_dist = match config.weight {
        Some((mu, sigma)) => {
            Some(LogNormal::new(mu, sigma).map_err(|e| GraphError::Config(e.to_string()))?)
        }
        None => None,
    };

    let mut builder = GraphBuilder::new(weight_dist.is_some());
    for v in 1..=n {
        builder.ensure_vertex(VertexId(v));
    }
    for node in 1..=n {
        let raw = degree_dist.sample(&mut rng);
        let degree = ((raw + 0.5).floor() as i64).clamp(0, n as i64 - 1) as u64;
        if degree == 0 {
            continue;
        }
        // Candidate index c in 0..n-1 maps to the vids 1..=n with `node`
        // skipped, so self-loops never arise.
        let to_vid = |c: u64| if c + 1 < node { c + 1 } else { c + 2 };
        for c in sample_distinct(&mut rng, n - 1, degree) {
            let src = VertexId(to_vid(c));
            let weight = match &weight_dist {
                Some(d) => d.sample(&mut rng),
                None => 1.0,
            };
            builder
                .add_edge(src, VertexId(node), weight)
                .expect("distinct sources cannot duplicate an edge");
        }
    }
    Ok(builder.build())
}

/// Floyd's sampling: `k` distinct values from `0..m`, ascending. Uses
/// exactly `k` RNG draws, which keeps generation deterministic and cheap
/// for sparse degrees.
fn sample_distinct(rng: &mut ChaCha8Rng, m: u64, k: u64) -> Vec<u64> {
    debug_assert!(k <= m);
    let mut chosen = std::collections::BTreeSet::new();
    for j in (m - k)..m {
        let t = rng.random_range(0..=j);
        if !chosen.insert(t) {
            chosen.insert(j);
        }
    }
    chosen.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_weighted_line() {
        let (vid, adj, weighted) = parse_line("3\t1:2.5 7:0.1", 1).unwrap();
        assert_eq!(vid, VertexId(3));
        assert_eq!(adj, vec![(VertexId(1), 2.5), (VertexId(7), 0.1)]);
        assert!(weighted);
    }

    #[test]
    fn parse_sink_line() {
        let (vid, adj, weighted) = parse_line("5\t", 1).unwrap();
        assert_eq!(vid, VertexId(5));
        assert!(adj.is_empty());
        assert!(!weighted);
    }

    #[test]
    fn parse_unweighted_defaults() {
        let (vid, adj, _) = parse_line("2\t4 9", 1).unwrap();
        assert_eq!(vid, VertexId(2));
        assert_eq!(adj, vec![(VertexId(4), 1.0), (VertexId(9), 1.0)]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_line("x\t1 2", 7).unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 7, .. }), "{err}");
        let err = parse_line("3\t1:abc", 9).unwrap_err();
        assert!(err.to_string().contains("line 9"), "{err}");
        // Spaces instead of a tab make the whole line the vid field.
        assert!(parse_line("5 3 4", 2).is_err());
    }

    #[test]
    fn parse_rejects_duplicate_targets() {
        assert!(parse_line("1\t2 2", 1).is_err());
    }

    #[test]
    fn parser_permits_self_loops() {
        let (_, adj, _) = parse_line("4\t4", 1).unwrap();
        assert_eq!(adj, vec![(VertexId(4), 1.0)]);
    }

    #[test]
    fn parse_registers_targets_as_sinks() {
        let g = Graph::parse("1\t2 3\n").unwrap();
        assert_eq!(g.vertex_count(), 3);
        assert!(g.out_edges(VertexId(3)).is_empty());
    }

    #[test]
    fn parse_rejects_duplicate_source_lines() {
        let err = Graph::parse("1\t2\n1\t3\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn partition_examples() {
        assert_eq!(partition(VertexId(7), 4).unwrap(), 3);
        assert_eq!(partition(VertexId(8), 4).unwrap(), 0);
        assert_eq!(partition(VertexId(0), 1).unwrap(), 0);
        assert!(matches!(partition(VertexId(1), 0), Err(GraphError::ZeroShards)));
    }

    #[test]
    fn generate_is_deterministic() {
        let config = GeneratorConfig {
            node_count: 500,
            degree_mu: -0.5,
            degree_sigma: 2.3,
            weight: Some((0.0, 1.0)),
            seed: 42,
        };
        let a = generate(&config).unwrap();
        let b = generate(&config).unwrap();
        assert_eq!(a.render(), b.render());
        assert!(a.edge_count() > 0);
    }

    #[test]
    fn generate_single_node() {
        let config = GeneratorConfig {
            node_count: 1,
            degree_mu: 0.0,
            degree_sigma: 1.0,
            weight: None,
            seed: 1,
        };
        let g = generate(&config).unwrap();
        assert_eq!(g.vertex_count(), 1);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn generate_rejects_self_loops_and_duplicates() {
        let config = GeneratorConfig {
            node_count: 40,
            degree_mu: 1.5,
            degree_sigma: 1.0,
            weight: None,
            seed: 7,
        };
        let g = generate(&config).unwrap();
        let mut seen = HashSet::new();
        for (s, t, _) in g.edges() {
            assert_ne!(s, t, "generator must not emit self-loops");
            assert!(seen.insert((s, t)), "duplicate edge {s}->{t}");
        }
    }

    #[test]
    fn generated_in_degree_mean_tracks_log_normal() {
        // Mean of log-normal(mu, sigma) is exp(mu + sigma^2 / 2).
        let config = GeneratorConfig {
            node_count: 100_000,
            degree_mu: -0.5,
            degree_sigma: 2.3,
            weight: None,
            seed: 1,
        };
        let g = generate(&config).unwrap();
        let expected = (-0.5f64 + 2.3f64 * 2.3 / 2.0).exp();
        let actual = g.edge_count() as f64 / g.vertex_count() as f64;
        let rel = (actual - expected).abs() / expected;
        assert!(rel < 0.10, "in-degree mean {actual} vs {expected} (rel {rel:.3})");
    }

    #[test]
    fn generated_weights_follow_config() {
        let config = GeneratorConfig {
            node_count: 2_000,
            degree_mu: 0.5,
            degree_sigma: 1.0,
            weight: Some((0.0, 1.0)),
            seed: 3,
        };
        let g = generate(&config).unwrap();
        assert!(g.is_weighted());
        let mean_log = g.edges().map(|(_, _, w)| w.ln()).sum::<f64>() / g.edge_count() as f64;
        assert!(mean_log.abs() < 0.1, "log-weight mean {mean_log}");
    }

    #[test]
    fn reversal_flips_edges() {
        let g = Graph::from_edges([], [(1, 2, 0.5), (2, 3, 1.5)], true).unwrap();
        let r = g.reversed();
        assert_eq!(r.out_edges(VertexId(2)), &[(VertexId(1), 0.5)]);
        assert_eq!(r.out_edges(VertexId(3)), &[(VertexId(2), 1.5)]);
        assert!(r.out_edges(VertexId(1)).is_empty());
    }

    proptest! {
        #[test]
        fn partition_is_stable_and_in_range(vid in 0u64..1_000_000, shards in 1usize..64) {
            let a = partition(VertexId(vid), shards).unwrap();
            let b = partition(VertexId(vid), shards).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!(a < shards);
        }

        #[test]
        fn render_parse_round_trip(seed in 0u64..500, n in 1u64..60, weighted in any::<bool>()) {
            let config = GeneratorConfig {
                node_count: n,
                degree_mu: 0.0,
                degree_sigma: 1.0,
                weight: if weighted { Some((0.0, 1.0)) } else { None },
                seed,
            };
            let g = generate(&config).unwrap();
            let reparsed = Graph::parse(&g.render()).unwrap();
            prop_assert_eq!(g, reparsed);
        }
    }
}
