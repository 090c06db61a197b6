//! The four-rule pruning cascade.
//!
//! Rule 1 deduplicates expressions by their per-thread-block sub-tiling
//! expression (the canonical text left after deleting the blockIdx-bound
//! loops). Rule 2 drops schedules whose producer reduction loop encloses
//! an intermediate's spatial loop, forcing several partial tiles to stay
//! in shared memory. Rule 3 drops tile sizes that force meaningful
//! padding. Rule 4 estimates per-block shared memory in closed form and
//! drops candidates beyond 1.2× the hardware cap, the slack absorbing
//! estimation error.

use std::collections::BTreeSet;

use crate::chain::{HardwareSpec, OperatorChain, TensorId};
use crate::error::Result;
use crate::expr::{
    enumerate_tile_sizes, space_size, Candidate, TileSizes, TilingExpr, TilingStrategy,
};
use crate::schedule::{self, ScheduledCandidate};

/// Estimation slack on the shared-memory cap.
pub const SHM_SLACK: f64 = 1.2;

/// Rule 1 key: delete the blockIdx-bound loops and print what remains.
pub fn dedup_key(expr: &TilingExpr, chain: &OperatorChain) -> String {
    let block: BTreeSet<_> = expr.block_axes(chain).into_iter().collect();
    expr.without_axes(&block).canonical(chain)
}

/// Rule 2: reject when a live reduction loop of an intermediate's
/// producer encloses a live loop indexing that intermediate — every tile
/// along the enclosed loop then holds partial results simultaneously.
pub fn rule2_reject(sched: &ScheduledCandidate) -> bool {
    sched.tensor_meta.iter().any(|meta| {
        meta.intermediate
            && meta.axes.iter().any(|&s| {
                sched.is_live(s)
                    && meta
                        .producer_reductions
                        .iter()
                        .any(|&r| sched.is_live(r) && sched.loop_encloses(r, s))
            })
    })
}

/// Rule 3: reject tiles that pad a power-of-two dimension at all, or any
/// other dimension by 5% or more.
pub fn rule3_reject(tiles: &TileSizes, chain: &OperatorChain) -> bool {
    chain.axes().iter().enumerate().any(|(a, axis)| {
        let tile = tiles.get(a);
        if axis.size % tile == 0 {
            false
        } else if axis.size.is_power_of_two() {
            true
        } else {
            let padded = axis.size.div_ceil(tile) * tile;
            (padded - axis.size) as f64 / axis.size as f64 >= 0.05
        }
    })
}

/// Closed-form per-block shared-memory estimate: the sum over tensors
/// touched in-block of their tile footprint, times the partial-tile
/// multiplicity where the Rule 2 situation persists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShmEstimate {
    pub bytes: u64,
    /// Per-tensor terms `(tensor, bytes)` in tensor order.
    pub terms: Vec<(TensorId, u64)>,
}

pub fn shm_estimate(sched: &ScheduledCandidate) -> ShmEstimate {
    let touched: BTreeSet<TensorId> =
        sched.statements.iter().flat_map(|s| s.touched.iter().copied()).collect();
    let mut terms = Vec::with_capacity(touched.len());
    let mut bytes = 0u64;
    for t in touched {
        let meta = &sched.tensor_meta[t];
        let mut mult = 1u64;
        if meta.intermediate {
            for &s in &meta.axes {
                let caged = sched.is_live(s)
                    && meta
                        .producer_reductions
                        .iter()
                        .any(|&r| sched.is_live(r) && sched.loop_encloses(r, s));
                if caged {
                    mult = mult.saturating_mul(sched.extent(s));
                }
            }
        }
        let term = meta.footprint_bytes.saturating_mul(mult);
        bytes = bytes.saturating_add(term);
        terms.push((t, term));
    }
    ShmEstimate { bytes, terms }
}

/// Rule 4: reject when the estimate exceeds `1.2 × shm_max`.
pub fn rule4_reject(sched: &ScheduledCandidate, hw: &HardwareSpec) -> (bool, ShmEstimate) {
    let est = shm_estimate(sched);
    (over_soft_limit(est.bytes, hw), est)
}

pub fn over_soft_limit(estimate_bytes: u64, hw: &HardwareSpec) -> bool {
    estimate_bytes as f64 > SHM_SLACK * hw.shm_max_bytes as f64
}

// ---------------------------------------------------------------------------
// The staged funnel

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RuleCounts {
    pub examined: u64,
    pub rejected: u64,
    pub retained: u64,
}

impl RuleCounts {
    fn of(examined: u64, retained: u64) -> Self {
        RuleCounts { examined, rejected: examined - retained, retained }
    }
}

/// Funnel counts per rule. Rules 1 and 2 count tiling expressions and
/// expression classes; Rule 3 counts tile-size vectors; Rule 4 counts
/// (class, tile-vector) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneReport {
    pub raw_space: u128,
    pub rule1: RuleCounts,
    pub rule2: RuleCounts,
    pub rule3: RuleCounts,
    pub rule4: RuleCounts,
    /// Sub-tiling-expression classes after Rule 1, first-seen order.
    pub rule1_class_keys: Vec<String>,
    /// Classes surviving Rule 2.
    pub surviving_class_keys: Vec<String>,
    pub final_candidates: u64,
}

impl PruneReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("stage\texamined\trejected\tretained\n");
        for (stage, c) in [
            ("rule1", self.rule1),
            ("rule2", self.rule2),
            ("rule3", self.rule3),
            ("rule4", self.rule4),
        ] {
            out.push_str(&format!("{stage}\t{}\t{}\t{}\n", c.examined, c.rejected, c.retained));
        }
        out.push_str(&format!("raw_space\t{}\n", self.raw_space));
        out.push_str(&format!("rule1_classes\t{}\n", self.rule1_class_keys.join(",")));
        out.push_str(&format!("rule2_classes\t{}\n", self.surviving_class_keys.join(",")));
        out.push_str(&format!("final\t{}\n", self.final_candidates));
        out
    }
}

/// One surviving expression class: the Rule 1 key and the first
/// expression (in canonical enumeration order) that produced it.
#[derive(Debug, Clone)]
pub struct ClassRep {
    pub key: String,
    pub expr: TilingExpr,
}

/// The search space after the expression-level rules, streaming the
/// tile-level rules on demand. Streams are pure and restartable.
pub struct PrunedSpace<'c> {
    chain: &'c OperatorChain,
    hw: HardwareSpec,
    pub classes: Vec<ClassRep>,
    rule1_class_keys: Vec<String>,
    expressions_examined: u64,
    raw_space: u128,
}

impl<'c> PrunedSpace<'c> {
    /// Apply Rules 1 and 2 to the expression stream. Rule 2 is structural:
    /// it is evaluated on each class representative expanded at nominal
    /// (minimum) tile sizes, before dead-loop elimination.
    pub fn new(
        chain: &'c OperatorChain,
        hw: &HardwareSpec,
        strategies: &[Box<dyn TilingStrategy>],
    ) -> Result<Self> {
        let mut keys_seen: BTreeSet<String> = BTreeSet::new();
        let mut rule1_class_keys = Vec::new();
        let mut reps: Vec<ClassRep> = Vec::new();
        let mut examined = 0u64;
        for expr in strategies.iter().flat_map(|s| s.enumerate(chain)) {
            examined += 1;
            let key = dedup_key(&expr, chain);
            if keys_seen.insert(key.clone()) {
                rule1_class_keys.push(key.clone());
                reps.push(ClassRep { key, expr });
            }
        }

        let nominal = TileSizes::new(vec![hw.min_tile; chain.axes().len()]);
        let mut classes = Vec::new();
        for rep in reps {
            let sched = schedule::hoist(&schedule::expand(
                &Candidate { expr: rep.expr.clone(), tiles: nominal.clone() },
                chain,
            )?);
            if !rule2_reject(&sched) {
                classes.push(rep);
            }
        }

        Ok(PrunedSpace {
            chain,
            hw: hw.clone(),
            classes,
            rule1_class_keys,
            expressions_examined: examined,
            raw_space: space_size(chain, hw, strategies),
        })
    }

    pub fn chain(&self) -> &'c OperatorChain {
        self.chain
    }

    pub fn hw(&self) -> &HardwareSpec {
        &self.hw
    }

    /// Lazy stream of fully scheduled survivors, tile-vector major with
    /// classes in order within each vector.
    pub fn survivors(&self) -> impl Iterator<Item = ScheduledCandidate> + '_ {
        enumerate_tile_sizes(self.chain, &self.hw)
            .filter(|tiles| !rule3_reject(tiles, self.chain))
            .flat_map(move |tiles| {
                self.classes.iter().filter_map(move |class| {
                    let cand =
                        Candidate { expr: class.expr.clone(), tiles: tiles.clone() };
                    let sched = schedule::schedule(&cand, self.chain)
                        .expect("enumerated candidates always place");
                    let (reject, _) = rule4_reject(&sched, &self.hw);
                    (!reject).then_some(sched)
                })
            })
    }

    /// Stream every survivor through `f`, accumulating the funnel report.
    pub fn scan(&self, mut f: impl FnMut(ScheduledCandidate)) -> PruneReport {
        let mut r3 = RuleCounts::default();
        let mut r4 = RuleCounts::default();
        for tiles in enumerate_tile_sizes(self.chain, &self.hw) {
            r3.examined += 1;
            if rule3_reject(&tiles, self.chain) {
                r3.rejected += 1;
                continue;
            }
            r3.retained += 1;
            for class in &self.classes {
                r4.examined += 1;
                let cand = Candidate { expr: class.expr.clone(), tiles: tiles.clone() };
                let sched = schedule::schedule(&cand, self.chain)
                    .expect("enumerated candidates always place");
                let (reject, _) = rule4_reject(&sched, &self.hw);
                if reject {
                    r4.rejected += 1;
                } else {
                    r4.retained += 1;
                    f(sched);
                }
            }
        }
        PruneReport {
            raw_space: self.raw_space,
            rule1: RuleCounts::of(self.expressions_examined, self.rule1_class_keys.len() as u64),
            rule2: RuleCounts::of(self.rule1_class_keys.len() as u64, self.classes.len() as u64),
            rule3: r3,
            rule4: r4,
            rule1_class_keys: self.rule1_class_keys.clone(),
            surviving_class_keys: self.classes.iter().map(|c| c.key.clone()).collect(),
            final_candidates: r4.retained,
        }
    }

    /// Funnel counts without keeping any candidate.
    pub fn report(&self) -> PruneReport {
        self.scan(|_| {})
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::parse_chain;
    use crate::expr::builtin_strategies;
    use crate::sim;

    use crate::chain::testdata::{small_two_gemm, two_gemm};

    fn hw(shm_max: u64) -> HardwareSpec {
        HardwareSpec {
            bandwidth_bytes_per_s: 1e12,
            peak_flops_per_s: 1e14,
            num_sm: 108,
            shm_max_bytes: shm_max,
            min_tile: 16,
        }
    }

    fn key(chain: &OperatorChain, text: &str) -> String {
        dedup_key(&TilingExpr::parse(text, chain).unwrap(), chain)
    }

    #[test]
    fn dedup_keys_match_goldens() {
        let chain = two_gemm();
        assert_eq!(key(&chain, "mhnk"), "nk");
        assert_eq!(key(&chain, "mnkh"), "nk");
        assert_eq!(key(&chain, "mhkn"), "kn");
        assert_eq!(key(&chain, "mn(k,h)"), "n(k,h)");
        assert_eq!(key(&chain, "nm(k,h)"), "n(k,h)");
    }

    #[test]
    fn deleting_every_axis_leaves_the_empty_key() {
        let chain = two_gemm();
        let expr = TilingExpr::parse("mhnk", &chain).unwrap();
        let all: BTreeSet<_> = (0..4).collect();
        assert_eq!(expr.without_axes(&all).canonical(&chain), "");
    }

    #[test]
    fn rule2_rejects_reduction_outside_spatial() {
        let chain = small_two_gemm();
        let nominal = TileSizes::new(vec![16, 16, 16, 16]);
        let build = |text: &str| {
            schedule::hoist(
                &schedule::expand(
                    &Candidate {
                        expr: TilingExpr::parse(text, &chain).unwrap(),
                        tiles: nominal.clone(),
                    },
                    &chain,
                )
                .unwrap(),
            )
        };
        assert!(rule2_reject(&build("mhkn")), "sub-expression kn caches partial C tiles");
        assert!(!rule2_reject(&build("mhnk")), "sub-expression nk reuses one C tile");
        assert!(!rule2_reject(&build("mn(k,h)")));
    }

    #[test]
    fn rule2_keeps_single_op_chains() {
        let chain = parse_chain(
            r#"{
            "axes": [{"name":"m","size":64},{"name":"n","size":64},{"name":"k","size":32}],
            "tensors": [
                {"name":"A","axes":["m","k"],"dtype_bytes":2,"storage":"external"},
                {"name":"B","axes":["k","n"],"dtype_bytes":2,"storage":"external"},
                {"name":"C","axes":["m","n"],"dtype_bytes":2,"storage":"external"}
            ],
            "ops": [{"name":"gemm","output":"C","inputs":["A","B"],
                     "equation":"C[m,n] += A[m,k] * B[k,n]"}]
        }"#,
        )
        .unwrap();
        for text in ["mnk", "knm", "kmn"] {
            let sched = schedule::hoist(
                &schedule::expand(
                    &Candidate {
                        expr: TilingExpr::parse(text, &chain).unwrap(),
                        tiles: TileSizes::new(vec![16, 16, 16]),
                    },
                    &chain,
                )
                .unwrap(),
            );
            assert!(!rule2_reject(&sched), "{text}");
        }
    }

    #[test]
    fn rule3_cases() {
        let mk = |sizes: [u64; 2]| {
            parse_chain(&format!(
                r#"{{
                "axes": [{{"name":"m","size":{}}},{{"name":"k","size":{}}}],
                "tensors": [
                    {{"name":"A","axes":["m","k"],"dtype_bytes":2,"storage":"external"}},
                    {{"name":"C","axes":["m"],"dtype_bytes":2,"storage":"external"}}
                ],
                "ops": [{{"name":"sum","output":"C","inputs":["A"],
                         "equation":"C[m] += A[m,k]"}}]
            }}"#,
                sizes[0], sizes[1]
            ))
            .unwrap()
        };
        // Power-of-two dimension with padding: rejected.
        let pow2 = mk([1024, 16]);
        assert!(rule3_reject(&TileSizes::new(vec![48, 16]), &pow2));
        assert!(!rule3_reject(&TileSizes::new(vec![64, 16]), &pow2));
        // Non-power-of-two with 0.8% padding: kept.
        let odd = mk([1000, 16]);
        assert!(!rule3_reject(&TileSizes::new(vec![48, 16]), &odd));
        // 1000 padded to 1024 by a 128-tile: 2.4% still fine; 12.5% at 375.
        assert!(!rule3_reject(&TileSizes::new(vec![128, 16]), &odd));
        let wide = mk([400, 16]);
        assert!(rule3_reject(&TileSizes::new(vec![384, 16]), &wide));
    }

    #[test]
    fn rule4_threshold_matches_hand_evaluation() {
        let chain = small_two_gemm();
        // Five 64×64 fp16 tiles: the small chain tiled at its full size.
        let sched = schedule::schedule(
            &Candidate {
                expr: TilingExpr::parse("mhnk", &chain).unwrap(),
                tiles: TileSizes::new(vec![64, 32, 64, 32]),
            },
            &chain,
        )
        .unwrap();
        let est = shm_estimate(&sched);
        // A: 64·32, B: 32·64, C: 64·64, D: 64·32, E: 64·32, all fp16.
        assert_eq!(est.bytes, 2 * (64 * 32 + 32 * 64 + 64 * 64 + 64 * 32 + 64 * 32));
        let (reject, _) = rule4_reject(&sched, &hw(49_152));
        assert!(!reject);

        assert!(over_soft_limit(100_000, &hw(65_536)), "100000 > 1.2·65536");
        assert!(!over_soft_limit(78_643, &hw(65_536)));
        assert!(!over_soft_limit(0, &hw(1)), "empty estimate always fits");
    }

    #[test]
    fn estimate_counts_partial_tile_multiplicity() {
        let chain = small_two_gemm();
        let build = |text: &str| {
            schedule::schedule(
                &Candidate {
                    expr: TilingExpr::parse(text, &chain).unwrap(),
                    tiles: TileSizes::new(vec![16, 16, 16, 16]),
                },
                &chain,
            )
            .unwrap()
        };
        let nk = shm_estimate(&build("mhnk"));
        let kn = shm_estimate(&build("mhkn"));
        // C is multiplied by l_n = 4 in the kn class.
        assert_eq!(kn.bytes - nk.bytes, 3 * 512);
    }

    #[test]
    fn funnel_counts_reconcile_on_a_small_space() {
        let chain = small_two_gemm();
        let hw = hw(8192);
        let space = PrunedSpace::new(&chain, &hw, &builtin_strategies()).unwrap();
        let mut streamed = 0u64;
        let report = space.scan(|_| streamed += 1);
        for c in [report.rule1, report.rule2, report.rule3, report.rule4] {
            assert_eq!(c.examined, c.rejected + c.retained);
        }
        assert_eq!(report.rule1.examined, 26);
        assert_eq!(report.rule1.retained, 3);
        assert_eq!(report.rule2.retained, 2);
        assert_eq!(report.final_candidates, streamed);
        assert_eq!(space.survivors().count() as u64, streamed);
        assert_eq!(report.rule4.examined, report.rule3.retained * 2);
        assert_eq!(report.raw_space, 1664);
        assert_eq!(report.rule1_class_keys, vec!["kn", "nk", "n(k,h)"]);
        assert_eq!(report.surviving_class_keys, vec!["nk", "n(k,h)"]);
    }

    #[test]
    fn surviving_set_is_order_independent() {
        // Rules 3 and 4 are independent predicates: the funnel's survivors
        // equal a brute filter that evaluates them in the opposite order.
        let chain = small_two_gemm();
        let hw = hw(8192);
        let space = PrunedSpace::new(&chain, &hw, &builtin_strategies()).unwrap();
        let streamed: BTreeSet<String> = space
            .survivors()
            .map(|s| format!("{}|{}", s.expr_string(), s.tiles_string()))
            .collect();
        let mut brute = BTreeSet::new();
        for class in &space.classes {
            for tiles in enumerate_tile_sizes(&chain, &hw) {
                let cand = Candidate { expr: class.expr.clone(), tiles: tiles.clone() };
                let sched = schedule::schedule(&cand, &chain).unwrap();
                let r4 = rule4_reject(&sched, &hw).0;
                let r3 = rule3_reject(&tiles, &chain);
                if !r4 && !r3 {
                    brute.insert(format!("{}|{}", sched.expr_string(), sched.tiles_string()));
                }
            }
        }
        assert_eq!(streamed, brute);
    }

    #[test]
    fn class_members_share_costs_exactly() {
        // Rule 1 soundness: same key and same tiles give identical
        // simulator traffic, flops, and peak shared memory.
        let chain = small_two_gemm();
        let tiles = TileSizes::new(vec![16, 16, 32, 16]);
        let run = |text: &str| {
            let sched = schedule::schedule(
                &Candidate {
                    expr: TilingExpr::parse(text, &chain).unwrap(),
                    tiles: tiles.clone(),
                },
                &chain,
            )
            .unwrap();
            sim::simulate(&sched.lower(), sim::DEFAULT_BUDGET).unwrap()
        };
        let members = ["mhnk", "mnkh", "mnhk", "nmkh", "nkmh", "kmnh"];
        let keys: BTreeSet<String> = members
            .iter()
            .map(|t| key(&chain, t))
            .collect();
        let reference = run(members[0]);
        for member in &members[1..] {
            let counts = run(member);
            if key(&chain, member) == key(&chain, members[0]) {
                assert_eq!(counts, reference, "{member}");
            }
        }
        assert!(keys.len() >= 2, "the member list must span several classes");
    }
}
