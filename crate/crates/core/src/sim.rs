//! Exact loop-nest trace simulator: the measurement oracle standing in
//! for hardware runs.
//!
//! Every loop iteration is interpreted — no sampling. Each Load/Store
//! execution adds its tile bytes, each Compute its tile flops. Shared
//! memory is tracked per tile instance: a tile is resident from its load
//! or first write to its last read. Instances are keyed by the values of
//! the loops indexing the tensor; a tile written under a live reduction
//! loop of its producer stays resident across that whole loop, which is
//! what makes reduction-outside-spatial schedules cache several partial
//! tiles at once.

use std::collections::HashMap;

use crate::chain::{AxisId, HardwareSpec, TensorId};
use crate::error::Infeasibility;
use crate::schedule::{LoopNest, NestItem, StmtId, StmtKind};

/// Default cap on total statement executions per simulation.
pub const DEFAULT_BUDGET: u64 = 1_000_000_000;

/// Exact counts from one simulation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceCounts {
    pub bytes_loaded: u64,
    pub bytes_stored: u64,
    pub flops: u64,
    /// Peak bytes of simultaneously resident tiles.
    pub peak_shm: u64,
    /// Executions per statement, indexed by statement id.
    pub stmt_exec_counts: Vec<u64>,
}

impl TraceCounts {
    pub fn total_bytes(&self) -> u64 {
        self.bytes_loaded + self.bytes_stored
    }
}

/// One line of the bounded event log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub step: u64,
    pub stmt: StmtId,
    /// Enclosing loop indices at execution time, outermost first.
    pub indices: Vec<(AxisId, u64)>,
}

/// Interpret the nest exactly. Fails only when the statement-execution
/// budget is exhausted.
pub fn simulate(nest: &LoopNest, budget: u64) -> Result<TraceCounts, Infeasibility> {
    Ok(run(nest, budget, 0)?.0)
}

/// Like [`simulate`], also returning the first `max_events` executions.
pub fn simulate_traced(
    nest: &LoopNest,
    budget: u64,
    max_events: usize,
) -> Result<(TraceCounts, Vec<TraceEvent>), Infeasibility> {
    run(nest, budget, max_events)
}

/// Convert counts to a simulated time. The shared-memory cap is enforced
/// strictly here (no estimation slack): schedules over the limit carry no
/// cost at all.
pub fn measure_cost(
    counts: &TraceCounts,
    hw: &HardwareSpec,
    n_blocks: u64,
) -> Result<f64, Infeasibility> {
    if counts.peak_shm > hw.shm_max_bytes {
        return Err(Infeasibility::SharedMemory {
            peak: counts.peak_shm,
            limit: hw.shm_max_bytes,
        });
    }
    let t = counts.total_bytes() as f64 / hw.bandwidth_bytes_per_s
        + counts.flops as f64 / hw.peak_flops_per_s;
    Ok(t * crate::model::slowdown_alpha(n_blocks.max(1), hw.num_sm))
}

// ---------------------------------------------------------------------------

/// Static per-tensor residency data.
struct TensorPlan {
    footprint: u64,
    /// (axis, stride) pairs forming the instance key.
    key: Vec<(AxisId, u64)>,
    /// Touches one instance receives within one window iteration.
    target: u64,
}

struct Interp<'n> {
    nest: &'n LoopNest,
    /// Path of enclosing loop axes per statement, outermost first.
    stmt_paths: Vec<Vec<AxisId>>,
    plans: Vec<Option<TensorPlan>>,
    idx: Vec<u64>,
    active: Vec<HashMap<u64, u64>>,
    shm_now: u64,
    counts: TraceCounts,
    steps: u64,
    budget: u64,
    events: Vec<TraceEvent>,
    max_events: usize,
}

fn run(
    nest: &LoopNest,
    budget: u64,
    max_events: usize,
) -> Result<(TraceCounts, Vec<TraceEvent>), Infeasibility> {
    let mut stmt_paths: Vec<Vec<AxisId>> = vec![Vec::new(); nest.stmts.len()];
    collect_paths(&nest.items, &mut Vec::new(), &mut stmt_paths);

    let plans = (0..nest.tensors.len())
        .map(|t| tensor_plan(nest, t, &stmt_paths))
        .collect();

    let mut interp = Interp {
        nest,
        stmt_paths,
        plans,
        idx: vec![0; nest.axes.len()],
        active: vec![HashMap::new(); nest.tensors.len()],
        shm_now: 0,
        counts: TraceCounts {
            stmt_exec_counts: vec![0; nest.stmts.len()],
            ..TraceCounts::default()
        },
        steps: 0,
        budget,
        events: Vec::new(),
        max_events,
    };
    interp.run_body(&nest.items)?;
    debug_assert_eq!(interp.shm_now, 0, "all tiles must be released at the end");
    Ok((interp.counts, interp.events))
}

fn collect_paths(items: &[NestItem], path: &mut Vec<AxisId>, out: &mut Vec<Vec<AxisId>>) {
    for item in items {
        match item {
            NestItem::Stmt(s) => out[*s] = path.clone(),
            NestItem::Loop { axis, body, .. } => {
                path.push(*axis);
                collect_paths(body, path, out);
                path.pop();
            }
        }
    }
}

fn tensor_plan(nest: &LoopNest, tensor: TensorId, paths: &[Vec<AxisId>]) -> Option<TensorPlan> {
    let touchers: Vec<StmtId> = (0..nest.stmts.len())
        .filter(|&s| nest.stmts[s].touched.contains(&tensor))
        .collect();
    let first = *touchers.first()?;

    // Window: the longest common prefix of the touchers' paths, shortened
    // so that no live reduction loop of the producer lies inside it.
    let mut window = paths[first].clone();
    for &s in &touchers[1..] {
        let common =
            window.iter().zip(&paths[s]).take_while(|(a, b)| a == b).count();
        window.truncate(common);
    }
    let meta = &nest.tensors[tensor];
    if let Some(cut) =
        window.iter().position(|a| meta.producer_reductions.contains(a))
    {
        window.truncate(cut);
    }

    let extent = |a: AxisId| nest.axes[a].extent;
    let target: u128 = touchers
        .iter()
        .map(|&s| {
            paths[s][window.len()..]
                .iter()
                .filter(|a| !meta.axes.contains(a))
                .map(|&a| u128::from(extent(a)))
                .product::<u128>()
        })
        .sum();

    let mut key = Vec::with_capacity(meta.axes.len());
    let mut stride = 1u64;
    for &a in &meta.axes {
        key.push((a, stride));
        stride = stride.saturating_mul(extent(a).max(1));
    }

    Some(TensorPlan {
        footprint: meta.footprint_bytes,
        key,
        target: u64::try_from(target).unwrap_or(u64::MAX),
    })
}

impl Interp<'_> {
    fn run_body(&mut self, items: &[NestItem]) -> Result<(), Infeasibility> {
        for item in items {
            match item {
                NestItem::Loop { axis, extent, body } => {
                    for i in 0..*extent {
                        self.idx[*axis] = i;
                        self.run_body(body)?;
                    }
                }
                NestItem::Stmt(s) => self.exec(*s)?,
            }
        }
        Ok(())
    }

    fn exec(&mut self, stmt: StmtId) -> Result<(), Infeasibility> {
        self.steps += 1;
        if self.steps > self.budget {
            return Err(Infeasibility::Budget { budget: self.budget });
        }
        let s = &self.nest.stmts[stmt];
        self.counts.stmt_exec_counts[stmt] += 1;
        match s.kind {
            StmtKind::Load => self.counts.bytes_loaded += s.tile_bytes,
            StmtKind::Store => self.counts.bytes_stored += s.tile_bytes,
            StmtKind::Compute => self.counts.flops += s.tile_flops,
        }
        if self.events.len() < self.max_events {
            self.events.push(TraceEvent {
                step: self.steps - 1,
                stmt,
                indices: self.stmt_paths[stmt].iter().map(|&a| (a, self.idx[a])).collect(),
            });
        }
        for &t in &s.touched {
            self.touch(t);
        }
        Ok(())
    }

    fn touch(&mut self, tensor: TensorId) {
        let Some(plan) = &self.plans[tensor] else { return };
        let key: u64 = plan
            .key
            .iter()
            .map(|&(a, stride)| self.idx[a].wrapping_mul(stride))
            .sum();
        match self.active[tensor].get_mut(&key) {
            Some(rem) => {
                *rem -= 1;
                if *rem == 0 {
                    self.active[tensor].remove(&key);
                    self.shm_now -= plan.footprint;
                }
            }
            None => {
                self.shm_now += plan.footprint;
                self.counts.peak_shm = self.counts.peak_shm.max(self.shm_now);
                if plan.target <= 1 {
                    self.shm_now -= plan.footprint;
                } else {
                    self.active[tensor].insert(key, plan.target - 1);
                }
            }
        }
    }
}
