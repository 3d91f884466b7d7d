//! Engine for iterative graph computation driven by accumulated deltas.
//!
//! Instead of recomputing every vertex state from its neighbors' full
//! states each round, vertices exchange only the *change* (delta) of
//! their state. Deltas are folded into vertex state with an abstract
//! accumulation operator, which makes the iteration order irrelevant:
//! the same fixed point is reached synchronously, asynchronously under
//! round-robin scheduling, or asynchronously under priority scheduling.
//!
//! The crate is organised around the pieces a computation needs:
//!
//! - [`graph`]: graph text format, hash partitioning, synthetic generation
//! - [`kernel`]: the algorithm abstraction (per-edge function, accumulator,
//!   initial values) plus executable checkers for its algebraic laws
//! - [`algorithms`]: ready-made kernels (shortest paths, ranking,
//!   components, similarity, linear solving, ...)
//! - [`engine`]: the parallel runtime with synchronous and asynchronous
//!   modes, termination detection, and checkpoint/recovery
//! - [`transport`]: message buffering, routing, and early aggregation
//! - [`sim`]: a deterministic single-threaded executor and the reference
//!   oracles used to validate everything else

pub mod algorithms;
pub mod cli;
pub mod engine;
pub mod graph;
pub mod kernel;
pub mod sim;
pub mod transport;

pub use graph::{Graph, GraphError, VertexId};
pub use kernel::{Kernel, Value};
