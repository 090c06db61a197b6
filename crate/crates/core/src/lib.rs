//! Fused-schedule search for chains of memory-bound tensor contractions.
//!
//! A chain of nominally compute-intensive contractions (GEMMs, einsums)
//! turns memory-bound when its reduction dimensions shrink; fusing the
//! chain into one kernel then pays off. This crate finds good fused
//! schedules for such chains:
//!
//! - [`chain`] — the operator-chain IR, chain/hardware file parsing, and
//!   the memory-bound/compute-bound classification ratio.
//! - [`expr`] — tiling expressions (deep and flat), tile-size vectors,
//!   and the enumeration strategies that span the raw search space.
//! - [`schedule`] — expansion of a candidate into load/compute/store
//!   statements, dependency-DAG analysis, hoisting of memory statements
//!   to their rightmost related loop, and dead-loop elimination.
//! - [`prune`] — the four pruning rules that cut the raw space by four
//!   orders of magnitude.
//! - [`model`] — the closed-form performance model (memory time, compute
//!   time, parallelism slowdown).
//! - [`sim`] — an exact loop-nest trace simulator used as the measurement
//!   oracle in place of hardware runs.
//! - [`measure`] — the pluggable measurement interface and its registry.
//! - [`search`] — the population-based heuristic search that combines
//!   model ranking with oracle measurement.
//! - [`emit`] — kernel-skeleton and report rendering.

pub mod chain;
pub mod emit;
pub mod error;
pub mod expr;
pub mod measure;
pub mod model;
pub mod prune;
pub mod schedule;
pub mod search;
pub mod sim;

pub use chain::{
    classify_mbci, compute_phi, ContractionOp, DimAxis, HardwareSpec, MbciClass, OperatorChain,
    Storage, TensorRef,
};
pub use error::{Error, Infeasibility, Result};
pub use expr::{Candidate, TileSizes, TilingExpr, TilingStrategy};
pub use model::CostBreakdown;
pub use prune::{PruneReport, PrunedSpace, ShmEstimate};
pub use schedule::{LoopNest, ScheduleDag, ScheduledCandidate, Statement, StmtKind};
pub use search::{SearchConfig, SearchResult};
pub use sim::TraceCounts;
