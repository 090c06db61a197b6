//! Kernel-skeleton and report rendering.
//!
//! The skeleton is a neutral tile-level pseudo-kernel, not compilable
//! code: a header with the grid and the shared-memory buffers, then one
//! line per loop and per statement with indentation equal to nesting
//! depth. Real code generation plugs in behind this surface. Emission is
//! a pure function of the schedule; identical schedules render to
//! byte-identical text.

use crate::chain::HardwareSpec;
use crate::error::{Error, Result};
use crate::model::{self, CostBreakdown};
use crate::prune::{shm_estimate, PruneReport};
use crate::schedule::{NestItem, ScheduledCandidate, StmtKind};
use crate::search::SearchResult;
use crate::sim;

/// Render a feasible schedule as a tile-level kernel skeleton. The
/// schedule is simulated first; one whose peak shared memory exceeds the
/// hard cap (or that blows the simulation budget) is refused.
pub fn emit_kernel_skeleton(sched: &ScheduledCandidate, hw: &HardwareSpec) -> Result<String> {
    let nest = sched.lower();
    let counts = sim::simulate(&nest, sim::DEFAULT_BUDGET).map_err(Error::Infeasible)?;
    if counts.peak_shm > hw.shm_max_bytes {
        return Err(Error::Infeasible(crate::error::Infeasibility::SharedMemory {
            peak: counts.peak_shm,
            limit: hw.shm_max_bytes,
        }));
    }

    let mut out = String::new();
    let grid: Vec<String> = sched
        .block_axes
        .iter()
        .map(|&a| format!("{}={}", sched.axis_name(a), sched.extent(a)))
        .collect();
    out.push_str(&format!(
        "grid:{}{} ({} blocks)\n",
        if grid.is_empty() { "" } else { " " },
        grid.join(" "),
        sched.n_blocks()
    ));

    let est = shm_estimate(sched);
    let terms: Vec<String> = est
        .terms
        .iter()
        .map(|&(t, bytes)| format!("{}={}B", sched.tensor_meta[t].name, bytes))
        .collect();
    out.push_str(&format!("smem: {} (total {}B)\n", terms.join(" "), est.bytes));

    render_items(sched, &nest.items, 0, &mut out);
    Ok(out)
}

fn render_items(sched: &ScheduledCandidate, items: &[NestItem], depth: usize, out: &mut String) {
    let indent = "  ".repeat(depth);
    for item in items {
        match item {
            NestItem::Loop { axis, extent, body } => {
                out.push_str(&format!(
                    "{indent}for {} in 0..{extent}:\n",
                    sched.axis_name(*axis)
                ));
                render_items(sched, body, depth + 1, out);
            }
            NestItem::Stmt(s) => {
                let stmt = &sched.statements[*s];
                let tensor_axes = |t: usize| {
                    sched.tensor_meta[t]
                        .axes
                        .iter()
                        .map(|&a| sched.axis_name(a))
                        .collect::<Vec<_>>()
                        .join(",")
                };
                let line = match stmt.kind {
                    StmtKind::Load => format!(
                        "load {}[tile {}] -> smem",
                        sched.tensor_meta[stmt.tensor].name,
                        tensor_axes(stmt.tensor)
                    ),
                    StmtKind::Store => format!(
                        "store {}[tile {}]",
                        sched.tensor_meta[stmt.tensor].name,
                        tensor_axes(stmt.tensor)
                    ),
                    StmtKind::Compute => {
                        let inputs: Vec<&str> = stmt.touched[1..]
                            .iter()
                            .map(|&t| sched.tensor_meta[t].name.as_str())
                            .collect();
                        let axes: Vec<&str> =
                            stmt.related.iter().map(|&a| sched.axis_name(a)).collect();
                        format!(
                            "compute {} += {} (tile {})",
                            sched.tensor_meta[stmt.tensor].name,
                            inputs.join("·"),
                            axes.join(",")
                        )
                    }
                };
                out.push_str(&format!("{indent}{line}\n"));
            }
        }
    }
}

/// Funnel, search history, and winner breakdown as a TSV-sectioned
/// report. With no search result the report is the funnel alone.
pub fn emit_report(
    prune: &PruneReport,
    search: Option<&SearchResult>,
    hw: &HardwareSpec,
) -> String {
    let mut out = String::from("# prune funnel\n");
    out.push_str(&prune.to_tsv());

    out.push_str("\n# search history\n");
    out.push_str("round\tbest_estimated\tbest_measured\tconverged\n");
    if let Some(result) = search {
        for row in &result.history {
            out.push_str(&format!(
                "{}\t{:e}\t{}\t{}\n",
                row.round,
                row.best_estimated,
                row.best_measured.map_or_else(|| "-".to_string(), |t| format!("{t:e}")),
                row.converged
            ));
        }
        let winner = &result.best_candidate;
        out.push_str("\n# winner\n");
        out.push_str(&format!("expr\t{}\n", winner.expr_string()));
        out.push_str(&format!("tiles\t{}\n", winner.tiles_string()));
        out.push_str(&format!("best_measured\t{:e}\n", result.best_measured));
        let breakdown: CostBreakdown = model::estimate_time(winner, hw);
        out.push_str(CostBreakdown::TSV_HEADER);
        out.push('\n');
        out.push_str(&breakdown.tsv_row());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::OperatorChain;
    use crate::expr::{builtin_strategies, Candidate, TileSizes, TilingExpr};
    use crate::measure::SimMeasurer;
    use crate::prune::PrunedSpace;
    use crate::schedule;
    use crate::search::{search, SearchConfig};

    use crate::chain::testdata::small_two_gemm;

    fn hw() -> HardwareSpec {
        HardwareSpec {
            bandwidth_bytes_per_s: 1e9,
            peak_flops_per_s: 1e12,
            num_sm: 8,
            shm_max_bytes: 16_384,
            min_tile: 16,
        }
    }

    fn sched(chain: &OperatorChain, expr: &str, tiles: &[u64]) -> ScheduledCandidate {
        schedule::schedule(
            &Candidate {
                expr: TilingExpr::parse(expr, chain).unwrap(),
                tiles: TileSizes::new(tiles.to_vec()),
            },
            chain,
        )
        .unwrap()
    }

    #[test]
    fn skeleton_golden_keeps_store_at_the_h_loop() {
        let chain = small_two_gemm();
        let text = emit_kernel_skeleton(&sched(&chain, "mhnk", &[16, 16, 16, 16]), &hw()).unwrap();
        assert_eq!(
            text,
            "grid: m=4 h=2 (8 blocks)\n\
             smem: A=512B B=512B C=512B D=512B E=512B (total 2560B)\n\
             for m in 0..4:\n\
             \x20 for h in 0..2:\n\
             \x20   for n in 0..4:\n\
             \x20     for k in 0..2:\n\
             \x20       load A[tile m,k] -> smem\n\
             \x20       load B[tile k,n] -> smem\n\
             \x20       compute C += A·B (tile m,k,n)\n\
             \x20     load D[tile n,h] -> smem\n\
             \x20     compute E += C·D (tile m,n,h)\n\
             \x20   store E[tile m,h]\n"
        );
    }

    #[test]
    fn all_dead_schedule_renders_a_flat_body() {
        let chain = small_two_gemm();
        let text = emit_kernel_skeleton(&sched(&chain, "mhnk", &[64, 32, 64, 32]), &hw()).unwrap();
        assert!(text.contains("grid: m=1 h=1 (1 blocks)"));
        assert!(text.lines().all(|l| !l.starts_with(' ') || l.is_empty()));
    }

    #[test]
    fn emitted_grid_matches_cost_model_blocks() {
        let chain = small_two_gemm();
        let s = sched(&chain, "mn(k,h)", &[16, 16, 16, 16]);
        let text = emit_kernel_skeleton(&s, &hw()).unwrap();
        let est = crate::model::estimate_time(&s, &hw());
        assert!(text.starts_with(&format!("grid: m=4 ({} blocks)", est.n_blocks)));
    }

    #[test]
    fn infeasible_schedule_is_refused() {
        let chain = small_two_gemm();
        let tight = HardwareSpec { shm_max_bytes: 256, ..hw() };
        let err = emit_kernel_skeleton(&sched(&chain, "mhnk", &[16, 16, 16, 16]), &tight);
        assert!(matches!(err, Err(Error::Infeasible(_))));
    }

    #[test]
    fn identical_schedules_render_identically() {
        let chain = small_two_gemm();
        let a = emit_kernel_skeleton(&sched(&chain, "mhnk", &[16, 16, 16, 16]), &hw()).unwrap();
        let b = emit_kernel_skeleton(&sched(&chain, "mhnk", &[16, 16, 16, 16]), &hw()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn skeleton_loop_lines_reconstruct_the_nest() {
        // Structural round-trip: (depth, axis, extent) triples rebuilt
        // from the text equal a fresh walk of the lowered nest.
        fn nest_loops(items: &[NestItem], depth: usize, out: &mut Vec<(usize, usize, u64)>) {
            for item in items {
                if let NestItem::Loop { axis, extent, body } = item {
                    out.push((depth, *axis, *extent));
                    nest_loops(body, depth + 1, out);
                }
            }
        }
        let chain = small_two_gemm();
        let s = sched(&chain, "mn(k,h)", &[16, 16, 16, 16]);
        let text = emit_kernel_skeleton(&s, &hw()).unwrap();
        let mut parsed = Vec::new();
        for line in text.lines().skip(2) {
            let trimmed = line.trim_start();
            if let Some(rest) = trimmed.strip_prefix("for ") {
                let depth = (line.len() - trimmed.len()) / 2;
                let (axis, range) = rest.split_once(" in 0..").unwrap();
                let extent: u64 = range.trim_end_matches(':').parse().unwrap();
                parsed.push((depth, chain.axis_id(axis).unwrap(), extent));
            }
        }
        let mut expected = Vec::new();
        nest_loops(&s.lower().items, 0, &mut expected);
        assert_eq!(parsed, expected);
    }

    #[test]
    fn report_reconciles_and_handles_empty_history() {
        let chain = small_two_gemm();
        let hw = hw();
        let space = PrunedSpace::new(&chain, &hw, &builtin_strategies()).unwrap();
        let report = space.report();
        let text = emit_report(&report, None, &hw);
        assert!(text.contains("# prune funnel"));
        assert!(text.ends_with("round\tbest_estimated\tbest_measured\tconverged\n"));

        let config = SearchConfig { population_n: 8, rng_seed: 1, ..SearchConfig::default() };
        let result = search(&space, &config, &SimMeasurer::default()).unwrap();
        let text = emit_report(&report, Some(&result), &hw);
        assert!(text.contains("# winner"));
        assert!(text.contains("best_measured"));
        // Funnel arithmetic survives rendering.
        for counts in [report.rule1, report.rule2, report.rule3, report.rule4] {
            assert!(text.contains(&format!(
                "{}\t{}\t{}",
                counts.examined, counts.rejected, counts.retained
            )));
        }
    }
}
