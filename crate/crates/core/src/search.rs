//! Population-based heuristic search.
//!
//! Each round estimates the whole population with the closed-form model,
//! measures the top candidates with the oracle, and stops once the
//! round's best measurement sits within `epsilon` (relative) of the best
//! seen so far. Otherwise the next population is drawn from the current
//! one with weights proportional to `1 / estimate`, mutating one axis's
//! tile size per draw.
//!
//! The returned `best_candidate` follows the convergence rule literally:
//! on convergence it is the round's top measured candidate, even if an
//! earlier round measured marginally better; `best_measured` is always
//! the minimum ever measured, and the per-round history keeps both in
//! view.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use rayon::prelude::*;

use crate::chain::{HardwareSpec, OperatorChain};
use crate::error::{Error, Result};
use crate::expr::Candidate;
use crate::measure::Measurer;
use crate::model;
use crate::prune::{self, PrunedSpace};
use crate::schedule::{self, ScheduledCandidate};

/// Mutation redraws before a parent passes through unchanged.
const MUTATION_RETRIES: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub population_n: usize,
    pub topk_n: usize,
    /// Relative convergence tolerance on measured times.
    pub epsilon: f64,
    pub rng_seed: u64,
    /// Safety cap on rounds.
    pub max_rounds: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { population_n: 512, topk_n: 8, epsilon: 0.01, rng_seed: 0, max_rounds: 64 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundStats {
    pub round: usize,
    /// Smallest model estimate in the round's population.
    pub best_estimated: f64,
    /// Smallest measured time this round, if anything was feasible.
    pub best_measured: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best_candidate: ScheduledCandidate,
    /// Minimum ever measured across all rounds.
    pub best_measured: f64,
    pub rounds: usize,
    pub converged: bool,
    pub history: Vec<RoundStats>,
}

/// Reservoir-sample `n` candidates uniformly without replacement; the
/// whole stream when it is shorter than `n`.
pub fn generate_candidates(
    stream: impl Iterator<Item = ScheduledCandidate>,
    n: usize,
    rng: &mut impl Rng,
) -> Vec<ScheduledCandidate> {
    let mut reservoir: Vec<ScheduledCandidate> = Vec::with_capacity(n.min(1024));
    for (i, cand) in stream.enumerate() {
        if reservoir.len() < n {
            reservoir.push(cand);
        } else {
            let j = rng.gen_range(0..=i);
            if j < n {
                reservoir[j] = cand;
            }
        }
    }
    reservoir
}

fn select_parents(weights: &[f64], count: usize, rng: &mut impl Rng) -> Vec<usize> {
    let dist = WeightedIndex::new(weights).expect("weights are positive and finite");
    (0..count).map(|_| dist.sample(rng)).collect()
}

/// Draw the next population: parents chosen with probability proportional
/// to `1 / estimate`, each child mutating exactly one axis's tile size to
/// an adjacent legal value under Rules 3 and 4. A draw whose retries all
/// fail passes the parent through.
pub fn mutate(
    population: &[ScheduledCandidate],
    estimates: &[f64],
    chain: &OperatorChain,
    hw: &HardwareSpec,
    rng: &mut impl Rng,
) -> Vec<ScheduledCandidate> {
    let weights: Vec<f64> = estimates.iter().map(|&e| 1.0 / e.max(f64::MIN_POSITIVE)).collect();
    let parents = select_parents(&weights, population.len(), rng);
    let n_axes = chain.axes().len();
    parents
        .into_iter()
        .map(|p| {
            let parent = &population[p];
            for _ in 0..MUTATION_RETRIES {
                let axis = rng.gen_range(0..n_axes);
                let up = rng.gen_bool(0.5);
                let tile = parent.candidate.tiles.get(axis);
                let cap = chain.axes()[axis].size.next_multiple_of(hw.min_tile);
                let new_tile = if up { tile + hw.min_tile } else { tile.wrapping_sub(hw.min_tile) };
                if new_tile < hw.min_tile || new_tile > cap {
                    continue;
                }
                let mut tiles = parent.candidate.tiles.clone();
                tiles.set(axis, new_tile);
                if prune::rule3_reject(&tiles, chain) {
                    continue;
                }
                let cand = Candidate { expr: parent.candidate.expr.clone(), tiles };
                let sched = schedule::schedule(&cand, chain)
                    .expect("mutation keeps the expression unchanged");
                if prune::rule4_reject(&sched, hw).0 {
                    continue;
                }
                return sched;
            }
            parent.clone()
        })
        .collect()
}

fn relative_difference(candidate: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        if candidate == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (candidate - reference).abs() / reference
    }
}

/// Run the search over a pruned space.
pub fn search(
    space: &PrunedSpace,
    config: &SearchConfig,
    measurer: &dyn Measurer,
) -> Result<SearchResult> {
    assert!(config.epsilon > 0.0, "epsilon must be positive");
    assert!(config.topk_n >= 1 && config.topk_n <= config.population_n);
    let chain = space.chain();
    let hw = space.hw();
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut population = generate_candidates(space.survivors(), config.population_n, &mut rng);
    if population.is_empty() {
        return Err(Error::EmptySpace);
    }

    let mut best: Option<(ScheduledCandidate, f64)> = None;
    let mut history = Vec::new();
    for round in 1..=config.max_rounds {
        let estimates: Vec<f64> =
            population.par_iter().map(|c| model::estimate_time(c, hw).t_estm).collect();
        let mut ranked: Vec<usize> = (0..population.len()).collect();
        ranked.sort_by(|&a, &b| estimates[a].total_cmp(&estimates[b]).then(a.cmp(&b)));

        // Measure down the ranking until top-k feasible results are in
        // hand; wholly infeasible prefixes fall through to later ranks.
        let mut measured: Vec<(usize, f64)> = Vec::new();
        for chunk in ranked.chunks(config.topk_n) {
            let results: Vec<(usize, Result<f64, _>)> = chunk
                .par_iter()
                .map(|&i| (i, measurer.measure(&population[i], hw)))
                .collect();
            for (i, r) in results {
                if let Ok(t) = r {
                    measured.push((i, t));
                }
            }
            if measured.len() >= config.topk_n {
                break;
            }
        }
        measured.truncate(config.topk_n);
        let best_estimated = estimates[ranked[0]];

        let Some(&(top1_idx, top1_t)) = measured
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        else {
            log::debug!("round {round}: no feasible measurement");
            history.push(RoundStats { round, best_estimated, best_measured: None, converged: false });
            population = mutate(&population, &estimates, chain, hw, &mut rng);
            continue;
        };

        // Convergence compares measured values only; the first round has
        // no reference yet and never converges.
        let converged = match &best {
            Some((_, best_t)) => relative_difference(top1_t, *best_t) < config.epsilon,
            None => false,
        };
        history.push(RoundStats { round, best_estimated, best_measured: Some(top1_t), converged });
        log::debug!("round {round}: est {best_estimated:e}, measured {top1_t:e}, converged {converged}");
        if converged {
            let best_t = best.map(|(_, t)| t).unwrap_or(f64::INFINITY);
            return Ok(SearchResult {
                best_candidate: population[top1_idx].clone(),
                best_measured: best_t.min(top1_t),
                rounds: round,
                converged: true,
                history,
            });
        }
        if best.as_ref().is_none_or(|(_, best_t)| top1_t < *best_t) {
            best = Some((population[top1_idx].clone(), top1_t));
        }
        population = mutate(&population, &estimates, chain, hw, &mut rng);
    }

    let (best_candidate, best_measured) = best.ok_or(Error::NoFeasibleCandidate)?;
    Ok(SearchResult {
        best_candidate,
        best_measured,
        rounds: config.max_rounds,
        converged: false,
        history,
    })
}
