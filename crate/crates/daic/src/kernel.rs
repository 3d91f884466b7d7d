//! The algorithm abstraction executed by the engine and the simulator.
//!
//! A [`Kernel`] bundles everything that defines one delta-accumulative
//! computation: the per-edge function applied to an outgoing delta, the
//! accumulation operator and its identity element, per-vertex initial
//! values, a scalar progress measure, and a scheduling priority. The
//! accumulation operator must be commutative and associative, the edge
//! function must distribute over it, and the initial values must equal
//! one classical update step — [`check_conditions`] probes all four laws
//! on sampled inputs and reports counterexamples.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{Graph, VertexId};

/// Scalar comparison: absolute tolerance for magnitudes up to 1,
/// relative beyond. Infinities of the same sign compare equal.
pub fn approx_eq_f64(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    if !a.is_finite() || !b.is_finite() {
        return false;
    }
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

/// A vertex state or delta. Values are compared within a tolerance,
/// rendered to round-trippable text for dumps and snapshots, and cloned
/// freely across worker threads.
pub trait Value: Clone + PartialEq + fmt::Debug + Send + Sync + 'static {
    fn approx_eq(&self, other: &Self, tol: f64) -> bool;
    fn render(&self) -> String;
    fn parse_text(text: &str) -> Result<Self, String>;
}

impl Value for f64 {
    fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        approx_eq_f64(*self, *other, tol)
    }

    fn render(&self) -> String {
        format!("{self:?}")
    }

    fn parse_text(text: &str) -> Result<Self, String> {
        text.parse::<f64>().map_err(|e| format!("bad float {text:?}: {e}"))
    }
}

impl Value for i64 {
    fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self == other || self.abs_diff(*other) as f64 <= tol
    }

    fn render(&self) -> String {
        self.to_string()
    }

    fn parse_text(text: &str) -> Result<Self, String> {
        text.parse::<i64>().map_err(|e| format!("bad integer {text:?}: {e}"))
    }
}

/// Fixed-length label distribution used by vector-valued kernels.
/// Accumulation is component-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVec(pub Vec<f64>);

impl LabelVec {
    pub fn zeros(len: usize) -> Self {
        LabelVec(vec![0.0; len])
    }

    pub fn scale(&self, factor: f64) -> Self {
        LabelVec(self.0.iter().map(|x| x * factor).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.0.len(), other.0.len());
        LabelVec(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl Value for LabelVec {
    fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.0.len() == other.0.len()
            && self.0.iter().zip(&other.0).all(|(a, b)| approx_eq_f64(*a, *b, tol))
    }

    fn render(&self) -> String {
        self.0.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
    }

    fn parse_text(text: &str) -> Result<Self, String> {
        if text.is_empty() {
            return Ok(LabelVec(Vec::new()));
        }
        text.split(',')
            .map(|t| t.parse::<f64>().map_err(|e| format!("bad component {t:?}: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(LabelVec)
    }
}

impl Value for BigRational {
    fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        if tol == 0.0 {
            return self == other;
        }
        let diff = (self - other).abs();
        match BigRational::from_f64(tol) {
            Some(t) => diff <= t,
            None => self == other,
        }
    }

    fn render(&self) -> String {
        format!("{}/{}", self.numer(), self.denom())
    }

    fn parse_text(text: &str) -> Result<Self, String> {
        let (n, d) = text.split_once('/').ok_or_else(|| format!("bad rational {text:?}"))?;
        let numer = n.parse::<BigInt>().map_err(|e| format!("bad numerator {n:?}: {e}"))?;
        let denom = d.parse::<BigInt>().map_err(|e| format!("bad denominator {d:?}: {e}"))?;
        if denom.is_zero() {
            return Err(format!("zero denominator in {text:?}"));
        }
        Ok(BigRational::new(numer, denom))
    }
}

/// Whether the progress metric approaches the fixed point from below or
/// above.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Increasing,
    Decreasing,
}

/// Per-vertex static payload: the adjacency list over which outgoing
/// deltas are fanned out.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VertexData {
    pub out_edges: Vec<(VertexId, f64)>,
}

impl VertexData {
    pub fn out_degree(&self) -> usize {
        self.out_edges.len()
    }
}

/// Context handed to the per-edge function: one outgoing edge of the
/// sending vertex plus the sender's payload (e.g. for out-degree
/// scaling).
pub struct EdgeContext<'a> {
    pub source: VertexId,
    pub target: VertexId,
    pub weight: f64,
    pub source_data: &'a VertexData,
}

type AccumulateFn<V> = dyn Fn(&V, &V) -> V + Send + Sync;
type EdgeFn<V> = dyn Fn(&EdgeContext<'_>, &V) -> V + Send + Sync;
type InitFn<V> = dyn Fn(VertexId, &VertexData) -> (V, V) + Send + Sync;
type ProgressFn<V> = dyn Fn(&V) -> f64 + Send + Sync;
type PriorityFn<V> = dyn Fn(&V, &V) -> f64 + Send + Sync;
type SampleFn<V> = dyn Fn(&mut ChaCha8Rng) -> V + Send + Sync;

/// One delta-accumulative algorithm. All closures must be pure; they are
/// invoked concurrently from many worker threads.
pub struct Kernel<V: Value> {
    name: String,
    direction: Direction,
    /// Accumulation is idempotent (min/max family). For such kernels an
    /// update whose delta does not change the vertex value emits nothing:
    /// the previously propagated value dominates every message the stale
    /// delta could produce, and on cyclic graphs suppressing them is what
    /// makes the computation quiesce.
    idempotent: bool,
    /// The global progress metric moves strictly in `direction` under
    /// every interleaving (true for sign-definite deltas). Kernels with
    /// mixed-sign deltas clear this so the engine skips the
    /// monotonicity check.
    monotone_progress: bool,
    zero: V,
    accumulate: Arc<AccumulateFn<V>>,
    edge: Arc<EdgeFn<V>>,
    init: Arc<InitFn<V>>,
    progress: Arc<ProgressFn<V>>,
    priority: Option<Arc<PriorityFn<V>>>,
    sample: Arc<SampleFn<V>>,
}

impl<V: Value> Clone for Kernel<V> {
    fn clone(&self) -> Self {
        Kernel {
            name: self.name.clone(),
            direction: self.direction,
            idempotent: self.idempotent,
            monotone_progress: self.monotone_progress,
            zero: self.zero.clone(),
            accumulate: Arc::clone(&self.accumulate),
            edge: Arc::clone(&self.edge),
            init: Arc::clone(&self.init),
            progress: Arc::clone(&self.progress),
            priority: self.priority.clone(),
            sample: Arc::clone(&self.sample),
        }
    }
}

impl<V: Value> fmt::Debug for Kernel<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("name", &self.name)
            .field("direction", &self.direction)
            .field("idempotent", &self.idempotent)
            .field("zero", &self.zero)
            .finish()
    }
}

impl<V: Value> Kernel<V> {
    pub fn new(
        name: impl Into<String>,
        direction: Direction,
        zero: V,
        accumulate: impl Fn(&V, &V) -> V + Send + Sync + 'static,
        edge: impl Fn(&EdgeContext<'_>, &V) -> V + Send + Sync + 'static,
        init: impl Fn(VertexId, &VertexData) -> (V, V) + Send + Sync + 'static,
        progress: impl Fn(&V) -> f64 + Send + Sync + 'static,
        sample: impl Fn(&mut ChaCha8Rng) -> V + Send + Sync + 'static,
    ) -> Self {
        Kernel {
            name: name.into(),
            direction,
            idempotent: false,
            monotone_progress: true,
            zero,
            accumulate: Arc::new(accumulate),
            edge: Arc::new(edge),
            init: Arc::new(init),
            progress: Arc::new(progress),
            priority: None,
            sample: Arc::new(sample),
        }
    }

    /// Marks the accumulation operator as idempotent, enabling the
    /// dominated-message suppression described on the field.
    pub fn idempotent(mut self) -> Self {
        self.idempotent = true;
        self
    }

    /// Declares that the progress metric may move against the kernel's
    /// direction mid-run (mixed-sign deltas).
    pub fn non_monotone(mut self) -> Self {
        self.monotone_progress = false;
        self
    }

    /// Overrides the default priority measure.
    pub fn with_priority(mut self, f: impl Fn(&V, &V) -> f64 + Send + Sync + 'static) -> Self {
        self.priority = Some(Arc::new(f));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn is_idempotent(&self) -> bool {
        self.idempotent
    }

    pub fn has_monotone_progress(&self) -> bool {
        self.monotone_progress
    }

    pub fn zero(&self) -> &V {
        &self.zero
    }

    pub fn accumulate(&self, a: &V, b: &V) -> V {
        (self.accumulate)(a, b)
    }

    /// The value propagated along `ctx` when the sender's delta is `x`.
    pub fn edge_message(&self, ctx: &EdgeContext<'_>, x: &V) -> V {
        (self.edge)(ctx, x)
    }

    /// Initial `(value, delta)` for a vertex.
    pub fn init_vertex(&self, vid: VertexId, data: &VertexData) -> (V, V) {
        (self.init)(vid, data)
    }

    pub fn progress_of(&self, v: &V) -> f64 {
        (self.progress)(v)
    }

    pub fn priority_of(&self, v: &V, dv: &V) -> f64 {
        match &self.priority {
            Some(f) => f(v, dv),
            None => priority_default(v, dv, self),
        }
    }

    pub fn sample_value(&self, rng: &mut ChaCha8Rng) -> V {
        (self.sample)(rng)
    }
}

/// Default scheduling priority: how much accumulating the pending delta
/// would move the vertex's progress contribution. Zero iff accumulation
/// leaves the progress measure unchanged.
pub fn priority_default<V: Value>(v: &V, dv: &V, kernel: &Kernel<V>) -> f64 {
    (kernel.progress_of(&kernel.accumulate(v, dv)) - kernel.progress_of(v)).abs()
}

/// Witness for a failed algebraic law.
#[derive(Debug, Clone)]
pub struct Counterexample {
    pub law: &'static str,
    pub detail: String,
}

/// Outcome of probing the kernel's algebraic laws. Any false flag is
/// accompanied by the first counterexample found.
#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub distributive_ok: bool,
    pub commutative_ok: bool,
    pub associative_ok: bool,
    pub identity_ok: bool,
    pub init_ok: bool,
    pub counterexample: Option<Counterexample>,
}

impl ConditionReport {
    pub fn all_ok(&self) -> bool {
        self.distributive_ok
            && self.commutative_ok
            && self.associative_ok
            && self.identity_ok
            && self.init_ok
    }
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flag = |ok| if ok { "ok" } else { "FAILED" };
        writeln!(f, "distributive: {}", flag(self.distributive_ok))?;
        writeln!(f, "commutative:  {}", flag(self.commutative_ok))?;
        writeln!(f, "associative:  {}", flag(self.associative_ok))?;
        writeln!(f, "identity:     {}", flag(self.identity_ok))?;
        writeln!(f, "init:         {}", flag(self.init_ok))?;
        if let Some(ce) = &self.counterexample {
            writeln!(f, "counterexample ({}): {}", ce.law, ce.detail)?;
        }
        Ok(())
    }
}

const CONDITION_SEED: u64 = 0xdac_5eed;

/// Probes the kernel's laws on `samples` random value triples and edges
/// drawn from a deterministic generator, each comparison within `tol`:
///
/// 1. the edge function distributes over accumulation,
/// 2. accumulation is commutative,
/// 3. accumulation is associative and has the declared identity,
/// 4. the initial `(value, delta)` pair equals one classical update step
///    applied to the initial values.
///
/// Failures are reported, never thrown.
pub fn check_conditions<V: Value>(
    kernel: &Kernel<V>,
    graph: &Graph,
    samples: usize,
    tol: f64,
) -> ConditionReport {
    let mut rng = ChaCha8Rng::seed_from_u64(CONDITION_SEED);
    let mut report = ConditionReport {
        distributive_ok: true,
        commutative_ok: true,
        associative_ok: true,
        identity_ok: true,
        init_ok: true,
        counterexample: None,
    };
    let fail = |ok: &mut bool,
                ce: &mut Option<Counterexample>,
                law: &'static str,
                detail: String| {
        *ok = false;
        if ce.is_none() {
            *ce = Some(Counterexample { law, detail });
        }
    };

    let edges: Vec<(VertexId, VertexId, f64)> = graph.edges().collect();
    let data_of = |vid: VertexId| VertexData { out_edges: graph.out_edges(vid).to_vec() };

    for _ in 0..samples {
        let x = kernel.sample_value(&mut rng);
        let y = kernel.sample_value(&mut rng);
        let z = kernel.sample_value(&mut rng);

        if report.commutative_ok {
            let xy = kernel.accumulate(&x, &y);
            let yx = kernel.accumulate(&y, &x);
            if !xy.approx_eq(&yx, tol) {
                fail(
                    &mut report.commutative_ok,
                    &mut report.counterexample,
                    "commutative",
                    format!("x={x:?} y={y:?}: x+y={xy:?} but y+x={yx:?}"),
                );
            }
        }
        if report.associative_ok {
            let lhs = kernel.accumulate(&kernel.accumulate(&x, &y), &z);
            let rhs = kernel.accumulate(&x, &kernel.accumulate(&y, &z));
            if !lhs.approx_eq(&rhs, tol) {
                fail(
                    &mut report.associative_ok,
                    &mut report.counterexample,
                    "associative",
                    format!("x={x:?} y={y:?} z={z:?}: (x+y)+z={lhs:?} but x+(y+z)={rhs:?}"),
                );
            }
        }
        if report.identity_ok {
            let xz = kernel.accumulate(&x, kernel.zero());
            if !xz.approx_eq(&x, tol) {
                fail(
                    &mut report.identity_ok,
                    &mut report.counterexample,
                    "identity",
                    format!("x={x:?}: x+0={xz:?}"),
                );
            }
        }
        if report.distributive_ok && !edges.is_empty() {
            let (src, dst, w) = edges[rng.random_range(0..edges.len())];
            let data = data_of(src);
            let ctx = EdgeContext { source: src, target: dst, weight: w, source_data: &data };
            let lhs = kernel.edge_message(&ctx, &kernel.accumulate(&x, &y));
            let rhs = kernel.accumulate(
                &kernel.edge_message(&ctx, &x),
                &kernel.edge_message(&ctx, &y),
            );
            if !lhs.approx_eq(&rhs, tol) {
                fail(
                    &mut report.distributive_ok,
                    &mut report.counterexample,
                    "distributive",
                    format!(
                        "edge {src}->{dst} (w={w}), x={x:?} y={y:?}: g(x+y)={lhs:?} but g(x)+g(y)={rhs:?}"
                    ),
                );
            }
        }
    }

    // Fourth condition: value0 + delta1 must equal one classical update
    // step applied to the initial values, i.e. the incoming edge images
    // of the initial values must fold to the identity against it.
    let in_edges = graph.in_edges();
    for &vid in graph.vertices() {
        if !report.init_ok {
            break;
        }
        let (v0, dv1) = kernel.init_vertex(vid, &data_of(vid));
        let expected = kernel.accumulate(&v0, &dv1);
        let mut step = kernel.zero().clone();
        let mut sources = in_edges[&vid].clone();
        sources.sort_by_key(|&(src, _)| src);
        for (src, w) in sources {
            let data = data_of(src);
            let (src_v0, _) = kernel.init_vertex(src, &data);
            let ctx = EdgeContext { source: src, target: vid, weight: w, source_data: &data };
            step = kernel.accumulate(&step, &kernel.edge_message(&ctx, &src_v0));
        }
        // The constant term recovered from the initialization.
        step = kernel.accumulate(&step, &expected);
        if !step.approx_eq(&expected, tol) {
            fail(
                &mut report.init_ok,
                &mut report.counterexample,
                "init",
                format!(
                    "vertex {vid}: v0+dv1={expected:?} but one classical step gives {step:?}"
                ),
            );
        }
    }

    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    fn sum_kernel() -> Kernel<f64> {
        Kernel::new(
            "sum",
            Direction::Increasing,
            0.0,
            |a, b| a + b,
            |ctx, x| ctx.weight * x,
            |_, _| (0.0, 1.0),
            |v| *v,
            |rng| rng.random_range(0.0..1.0),
        )
    }

    fn min_kernel() -> Kernel<f64> {
        Kernel::new(
            "min",
            Direction::Decreasing,
            f64::INFINITY,
            |a, b| a.min(*b),
            |ctx, x| x + ctx.weight,
            |vid, _| (f64::INFINITY, if vid.0 == 1 { 0.0 } else { f64::INFINITY }),
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

    fn broken_kernel() -> Kernel<f64> {
        // g(x) = x^2 does not distribute over +.
        Kernel::new(
            "broken",
            Direction::Increasing,
            0.0,
            |a, b| a + b,
            |_, x| x * x,
            |_, _| (0.0, 0.0),
            |v| *v,
            |rng| rng.random_range(0.5..2.0),
        )
    }

    fn small_graph() -> Graph {
        Graph::from_edges([], [(1, 2, 0.5), (2, 3, 2.0), (3, 1, 1.0), (1, 3, 0.25)], true).unwrap()
    }

    #[test]
    fn priority_default_examples() {
        let k = sum_kernel();
        assert!(approx_eq_f64(priority_default(&0.4, &0.3, &k), 0.3, 1e-12));

        let k = min_kernel();
        assert!(approx_eq_f64(priority_default(&5.0, &3.0, &k), 2.0, 1e-12));
        assert_eq!(priority_default(&5.0, &f64::INFINITY, &k), 0.0);
    }

    #[test]
    fn priority_zero_iff_progress_unchanged() {
        let k = sum_kernel();
        assert_eq!(priority_default(&0.7, &0.0, &k), 0.0);
        assert!(priority_default(&0.7, &1e-3, &k) > 0.0);
    }

    #[test]
    fn sum_and_min_kernels_satisfy_conditions() {
        let g = small_graph();
        for k in [sum_kernel(), min_kernel()] {
            let report = check_conditions(&k, &g, 2_000, 1e-9);
            assert!(report.all_ok(), "{} failed: {report}", k.name());
        }
    }

    #[test]
    fn broken_kernel_fails_distributivity_with_witness() {
        let g = small_graph();
        let report = check_conditions(&broken_kernel(), &g, 500, 1e-9);
        assert!(!report.distributive_ok);
        assert!(report.commutative_ok && report.associative_ok && report.identity_ok);
        let ce = report.counterexample.expect("failure must carry a witness");
        assert_eq!(ce.law, "distributive");
    }

    #[test]
    fn bad_init_fails_fourth_condition() {
        // value0 = 1 with delta1 = 0 is not one classical step of this
        // kernel (incoming images of 1.0 do not vanish).
        let k = Kernel::new(
            "bad-init",
            Direction::Increasing,
            0.0,
            |a, b| a + b,
            |ctx: &EdgeContext<'_>, x: &f64| ctx.weight * x,
            |_, _| (1.0, 0.0),
            |v: &f64| *v,
            |rng| rng.random_range(0.0..1.0),
        );
        let report = check_conditions(&k, &small_graph(), 100, 1e-9);
        assert!(!report.init_ok);
        assert_eq!(report.counterexample.unwrap().law, "init");
    }

    #[test]
    fn approx_eq_is_absolute_then_relative() {
        assert!(approx_eq_f64(0.5, 0.5 + 5e-10, 1e-9));
        assert!(!approx_eq_f64(0.5, 0.5 + 5e-9, 1e-9));
        assert!(approx_eq_f64(1e12, 1e12 * (1.0 + 5e-10), 1e-9));
        assert!(approx_eq_f64(f64::INFINITY, f64::INFINITY, 1e-9));
        assert!(!approx_eq_f64(f64::INFINITY, 1.0, 1e-9));
    }

    #[test]
    fn value_text_round_trips() {
        for v in [0.36000000000000004f64, f64::INFINITY, -1.0, 2.5e-17] {
            assert_eq!(f64::parse_text(&v.render()).unwrap(), v);
        }
        let lv = LabelVec(vec![0.1, 0.9, 0.0]);
        assert_eq!(LabelVec::parse_text(&lv.render()).unwrap(), lv);
        let r = BigRational::new(BigInt::from(-3), BigInt::from(7));
        assert_eq!(BigRational::parse_text(&r.render()).unwrap(), r);
        assert_eq!(i64::parse_text("-12").unwrap(), -12);
    }
}
