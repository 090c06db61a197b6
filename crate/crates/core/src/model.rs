//! Closed-form performance model: memory time, compute time, and the
//! parallelism slowdown factor.
//!
//! Every term is a structural sum over the placed statements: a memory
//! statement contributes its tile bytes times the product of enclosing
//! loop extents divided by the bandwidth, a compute statement its tile
//! flops times the same trip product divided by peak throughput. Kernels
//! that launch too few thread blocks to fill the machine are penalized by
//! `alpha = (n_blocks + num_sm) / n_blocks`.

use crate::chain::HardwareSpec;
use crate::schedule::{ScheduledCandidate, StmtKind};

/// The assembled estimate. `t_estm = (t_mem + t_comp) × alpha` holds
/// bit-for-bit on the stored fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBreakdown {
    pub t_mem: f64,
    pub t_comp: f64,
    pub alpha: f64,
    pub t_estm: f64,
    pub n_blocks: u64,
}

impl CostBreakdown {
    pub const TSV_HEADER: &'static str = "t_mem\tt_comp\talpha\tt_estm\tn_blocks";

    pub fn tsv_row(&self) -> String {
        format!(
            "{:e}\t{:e}\t{}\t{:e}\t{}",
            self.t_mem, self.t_comp, self.alpha, self.t_estm, self.n_blocks
        )
    }
}

/// Exact integer numerators of the two time terms: total bytes moved and
/// total flops, as structural trip products. The trace simulator must
/// reproduce both exactly.
pub fn traffic_numerators(sched: &ScheduledCandidate) -> (u128, u128) {
    let mut bytes: u128 = 0;
    let mut flops: u128 = 0;
    for (id, stmt) in sched.statements.iter().enumerate() {
        let trips = sched.trip_count(id);
        match stmt.kind {
            StmtKind::Load | StmtKind::Store => bytes += u128::from(stmt.tile_bytes) * trips,
            StmtKind::Compute => flops += u128::from(stmt.tile_flops) * trips,
        }
    }
    (bytes, flops)
}

/// Total memory-access time in seconds.
pub fn t_mem(sched: &ScheduledCandidate, hw: &HardwareSpec) -> f64 {
    traffic_numerators(sched).0 as f64 / hw.bandwidth_bytes_per_s
}

/// Total compute time in seconds.
pub fn t_comp(sched: &ScheduledCandidate, hw: &HardwareSpec) -> f64 {
    traffic_numerators(sched).1 as f64 / hw.peak_flops_per_s
}

/// Slowdown for under-filled grids: `(n_blocks + num_sm) / n_blocks`.
/// Decreasing in `n_blocks` with limit 1. An empty grid is invalid.
pub fn slowdown_alpha(n_blocks: u64, num_sm: u64) -> f64 {
    assert!(n_blocks > 0, "a schedule must launch at least one thread block");
    (n_blocks + num_sm) as f64 / n_blocks as f64
}

/// Assemble the full estimate for a scheduled candidate.
pub fn estimate_time(sched: &ScheduledCandidate, hw: &HardwareSpec) -> CostBreakdown {
    let (bytes, flops) = traffic_numerators(sched);
    let t_mem = bytes as f64 / hw.bandwidth_bytes_per_s;
    let t_comp = flops as f64 / hw.peak_flops_per_s;
    let n_blocks = sched.n_blocks().max(1);
    let alpha = slowdown_alpha(n_blocks, hw.num_sm);
    CostBreakdown { t_mem, t_comp, alpha, t_estm: (t_mem + t_comp) * alpha, n_blocks }
}
