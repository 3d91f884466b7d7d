//! Exact-arithmetic kernels for the closed-form equivalence tests.
//!
//! Additive kernels on tiny graphs can run entirely in rationals: every
//! `f64` edge weight converts to an exact rational coefficient, so the
//! per-edge function is `coeff * x` with no rounding, and the closed
//! form must equal the executed schedule bit for bit, independent of
//! association order.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, ToPrimitive, Zero};
use rand::Rng;

use crate::graph::VertexId;
use crate::kernel::{Direction, Kernel};

/// Exact conversion; every finite `f64` is a rational.
pub fn from_f64(x: f64) -> BigRational {
    BigRational::from_f64(x).expect("finite weight")
}

pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// A linear additive kernel over rationals: accumulation is `+`, the
/// per-edge function multiplies by the edge weight (converted exactly),
/// and each vertex starts at zero with the delta `init` assigns.
pub fn linear_kernel(
    name: impl Into<String>,
    init: impl Fn(VertexId) -> BigRational + Send + Sync + 'static,
) -> Kernel<BigRational> {
    Kernel::new(
        name,
        Direction::Increasing,
        BigRational::zero(),
        |a: &BigRational, b: &BigRational| a + b,
        |ctx, x: &BigRational| from_f64(ctx.weight) * x,
        move |vid, _| (BigRational::zero(), init(vid)),
        |v: &BigRational| v.to_f64().unwrap_or(f64::MAX),
        |rng| ratio(rng.random_range(-6..=6), rng.random_range(1..=6)),
    )
}
