//! Cross-module properties: the closed-form model against the exact
//! trace simulator over randomized schedules and several chain shapes.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tilefuse::chain::{parse_chain, HardwareSpec, OperatorChain};
use tilefuse::expr::{
    axis_tile_options, builtin_strategies, Candidate, TileSizes, TilingExpr,
};
use tilefuse::model;
use tilefuse::prune;
use tilefuse::schedule::{self, ScheduledCandidate};
use tilefuse::sim;

fn hw() -> HardwareSpec {
    HardwareSpec {
        bandwidth_bytes_per_s: 1e9,
        peak_flops_per_s: 1e12,
        num_sm: 16,
        shm_max_bytes: 1 << 22,
        min_tile: 16,
    }
}

fn two_gemm(m: u64, n: u64, k: u64, h: u64, dtype: u64) -> OperatorChain {
    parse_chain(&format!(
        r#"{{
        "axes": [
            {{"name": "m", "size": {m}}},
            {{"name": "k", "size": {k}}},
            {{"name": "n", "size": {n}}},
            {{"name": "h", "size": {h}}}
        ],
        "tensors": [
            {{"name": "A", "axes": ["m", "k"], "dtype_bytes": {dtype}, "storage": "external"}},
            {{"name": "B", "axes": ["k", "n"], "dtype_bytes": {dtype}, "storage": "external"}},
            {{"name": "C", "axes": ["m", "n"], "dtype_bytes": {dtype}, "storage": "intermediate"}},
            {{"name": "D", "axes": ["n", "h"], "dtype_bytes": {dtype}, "storage": "external"}},
            {{"name": "E", "axes": ["m", "h"], "dtype_bytes": {dtype}, "storage": "external"}}
        ],
        "ops": [
            {{"name": "gemm1", "output": "C", "inputs": ["A", "B"],
             "equation": "C[m,n] += A[m,k] * B[k,n]"}},
            {{"name": "gemm2", "output": "E", "inputs": ["C", "D"],
             "equation": "E[m,h] += C[m,n] * D[n,h]"}}
        ]
    }}"#
    ))
    .unwrap()
}

fn shapes() -> Vec<OperatorChain> {
    vec![
        two_gemm(64, 64, 32, 32, 2),
        two_gemm(128, 64, 16, 48, 2),
        two_gemm(96, 80, 64, 16, 4),
        two_gemm(64, 32, 64, 64, 1),
    ]
}

/// A random legal candidate: any enumerated expression, each axis tiled
/// uniformly over its option ladder.
fn random_candidate(chain: &OperatorChain, rng: &mut impl Rng) -> Candidate {
    let exprs: Vec<TilingExpr> =
        builtin_strategies().iter().flat_map(|s| s.enumerate(chain)).collect();
    let expr = exprs[rng.gen_range(0..exprs.len())].clone();
    let tiles = TileSizes::new(
        chain
            .axes()
            .iter()
            .map(|a| {
                let options = axis_tile_options(a.size, 16);
                options[rng.gen_range(0..options.len())]
            })
            .collect(),
    );
    Candidate { expr, tiles }
}

#[test]
fn simulator_reproduces_structural_trip_counts_everywhere() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for chain in &shapes() {
        for _ in 0..40 {
            let cand = random_candidate(chain, &mut rng);
            let sched = schedule::schedule(&cand, chain).unwrap();
            let counts = sim::simulate(&sched.lower(), sim::DEFAULT_BUDGET).unwrap();
            for (id, &got) in counts.stmt_exec_counts.iter().enumerate() {
                assert_eq!(
                    u128::from(got),
                    sched.trip_count(id),
                    "{} {} stmt {id}",
                    cand.expr.canonical(chain),
                    cand.tiles.render(chain)
                );
            }
            let (bytes, flops) = model::traffic_numerators(&sched);
            assert_eq!(u128::from(counts.total_bytes()), bytes);
            assert_eq!(u128::from(counts.flops), flops);
        }
    }
}

#[test]
fn hoisting_preserves_flops_and_never_adds_traffic() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for chain in &shapes() {
        for _ in 0..25 {
            let cand = random_candidate(chain, &mut rng);
            let expanded = schedule::expand(&cand, chain).unwrap();
            let hoisted = schedule::hoist(&expanded);
            let before = sim::simulate(&expanded.lower(), sim::DEFAULT_BUDGET).unwrap();
            let after = sim::simulate(&hoisted.lower(), sim::DEFAULT_BUDGET).unwrap();
            assert_eq!(before.flops, after.flops, "hoisting never moves compute work");
            assert!(after.total_bytes() <= before.total_bytes());

            // Dead-loop elimination may additionally remove whole loops
            // (and recomputation with them); traffic still never grows.
            let optimized = schedule::eliminate_dead_loops(&hoisted);
            let final_counts = sim::simulate(&optimized.lower(), sim::DEFAULT_BUDGET).unwrap();
            assert!(final_counts.total_bytes() <= after.total_bytes());
            assert!(final_counts.flops <= after.flops);
        }
    }
}

#[test]
fn flat_schedules_do_exactly_the_chain_flops() {
    // Flat tilings never recompute a producer under an unrelated loop, so
    // without padding the simulated flop total equals the chain total.
    let chain = two_gemm(64, 64, 32, 32, 2);
    for tiles in [[16, 16, 16, 16], [32, 16, 64, 32], [64, 32, 16, 16]] {
        let cand = Candidate {
            expr: TilingExpr::parse("mn(k,h)", &chain).unwrap(),
            tiles: TileSizes::new(tiles.to_vec()),
        };
        let sched = schedule::schedule(&cand, &chain).unwrap();
        let counts = sim::simulate(&sched.lower(), sim::DEFAULT_BUDGET).unwrap();
        assert_eq!(u128::from(counts.flops), chain.total_flops());
    }
}

#[test]
fn deep_schedules_never_undershoot_the_chain_flops() {
    // Deep tilings may recompute the first op's tiles across unrelated
    // enclosing loops; padding inflates work further. The chain total is
    // a lower bound either way.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for chain in &shapes() {
        for _ in 0..20 {
            let cand = random_candidate(chain, &mut rng);
            let sched = schedule::schedule(&cand, chain).unwrap();
            let counts = sim::simulate(&sched.lower(), sim::DEFAULT_BUDGET).unwrap();
            assert!(u128::from(counts.flops) >= chain.total_flops());
        }
    }
}

#[test]
fn elimination_then_hoist_is_idempotent_over_random_schedules() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for chain in &shapes() {
        for _ in 0..25 {
            let cand = random_candidate(chain, &mut rng);
            let sched = schedule::schedule(&cand, chain).unwrap();
            let again = schedule::eliminate_dead_loops(&schedule::hoist(&sched));
            assert_eq!(sched, again);
        }
    }
}

#[test]
fn memory_statements_sit_inside_only_related_or_forced_loops() {
    // After hoisting, a memory statement's scope is one of its own live
    // related loops (or the root).
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for chain in &shapes() {
        for _ in 0..25 {
            let cand = random_candidate(chain, &mut rng);
            let sched = schedule::schedule(&cand, chain).unwrap();
            for (id, stmt) in sched.statements.iter().enumerate() {
                if stmt.tile_bytes == 0 {
                    continue;
                }
                match sched.stmt_scope(id) {
                    None => assert!(stmt.related.iter().all(|&a| !sched.is_live(a))),
                    Some(axis) => assert!(
                        stmt.related.contains(&axis),
                        "{} sits under unrelated loop {}",
                        stmt.label,
                        sched.axis_name(axis)
                    ),
                }
            }
        }
    }
}

#[test]
fn estimator_and_simulator_agree_near_the_limit_often_enough() {
    // Quadrant agreement: estimate vs 1.2x the cap, simulator peak vs the
    // cap itself. Sample the pre-rule-4 stream of a mid-size shape.
    let chain = two_gemm(256, 256, 128, 128, 2);
    let hw = HardwareSpec { shm_max_bytes: 96 * 1024, ..hw() };
    let space = prune::PrunedSpace::new(&chain, &hw, &builtin_strategies()).unwrap();
    let mut agree = 0u64;
    let mut total = 0u64;
    for tiles in tilefuse::expr::enumerate_tile_sizes(&chain, &hw) {
        if prune::rule3_reject(&tiles, &chain) {
            continue;
        }
        for class in &space.classes {
            let sched = schedule::schedule(
                &Candidate { expr: class.expr.clone(), tiles: tiles.clone() },
                &chain,
            )
            .unwrap();
            let est = prune::shm_estimate(&sched).bytes;
            let peak = sim::simulate(&sched.lower(), sim::DEFAULT_BUDGET).unwrap().peak_shm;
            let est_over = est as f64 > 1.2 * hw.shm_max_bytes as f64;
            let peak_over = peak > hw.shm_max_bytes;
            total += 1;
            if est_over == peak_over {
                agree += 1;
            }
        }
    }
    assert!(total > 100);
    let rate = agree as f64 / total as f64;
    assert!(rate > 0.9, "agreement {rate:.3} over {total} candidates");
}

fn full_pipeline_schedule(chain: &OperatorChain, expr: &str, tiles: &[u64]) -> ScheduledCandidate {
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
fn three_op_chains_schedule_and_balance() {
    let chain = parse_chain(&std::fs::read_to_string(
        concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/chains/three_gemm.json"),
    ).unwrap())
    .unwrap();
    // A flat expression with an empty exclusive group for the middle op.
    let sched = full_pipeline_schedule(&chain, "mhn(k,g)", &[16, 16, 16, 16, 16]);
    let counts = sim::simulate(&sched.lower(), sim::DEFAULT_BUDGET).unwrap();
    let (bytes, flops) = model::traffic_numerators(&sched);
    assert_eq!(u128::from(counts.total_bytes()), bytes);
    assert_eq!(u128::from(counts.flops), flops);
}
