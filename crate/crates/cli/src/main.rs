//! Command-line driver: classify, enumerate, prune, search, simulate,
//! and emit over chain/hardware description files.
//!
//! Machine-readable output is TSV on stdout; diagnostics go to stderr.
//! Exit codes: 0 success, 1 user error, 2 infeasible candidate.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tilefuse::chain::{self, HardwareSpec, OperatorChain};
use tilefuse::emit;
use tilefuse::error::Error as CoreError;
use tilefuse::expr::{self, Candidate, TileSizes, TilingExpr, TilingStrategy};
use tilefuse::measure;
use tilefuse::model::CostBreakdown;
use tilefuse::prune::PrunedSpace;
use tilefuse::schedule::{self, ScheduledCandidate};
use tilefuse::search::{self, SearchConfig};
use tilefuse::sim;
use tilefuse::{model, Result};

#[derive(Parser)]
#[command(name = "tilefuse", version, about = "Fused-schedule search for tensor contraction chains")]
struct Cli {
    /// Worker threads for candidate evaluation (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Inputs {
    /// Chain description (JSON).
    chain: PathBuf,
    /// Hardware description (JSON).
    hw: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Compute-to-traffic ratios per op and the memory-bound verdict.
    Classify {
        #[command(flatten)]
        inputs: Inputs,
        /// Tile sizes as `m=256,n=256,...` (default: 256-capped probe).
        #[arg(long)]
        tile: Option<String>,
        /// Explain the ratio conventions alongside the verdict.
        #[arg(long)]
        explain: bool,
    },
    /// List tiling expressions, or count the raw candidate space.
    Enumerate {
        #[command(flatten)]
        inputs: Inputs,
        /// Print only the total candidate count.
        #[arg(long)]
        count_only: bool,
        /// Comma-separated strategy names (default: deep,flat).
        #[arg(long, value_delimiter = ',')]
        strategies: Vec<String>,
    },
    /// Run the pruning funnel and print per-rule counts.
    Prune {
        #[command(flatten)]
        inputs: Inputs,
        /// Also write the funnel TSV to a file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Heuristic search for the best fused schedule.
    Search {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 512)]
        population: usize,
        #[arg(long, default_value_t = 8)]
        topk: usize,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        #[arg(long, default_value_t = 64)]
        max_rounds: usize,
        /// Measurement backend.
        #[arg(long, default_value = "sim")]
        measure: String,
        /// Also print the winner's kernel skeleton.
        #[arg(long)]
        emit: bool,
        /// Write a full report (funnel, history, winner) to a file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Simulate one explicit candidate and print exact oracle counts.
    Simulate {
        #[command(flatten)]
        inputs: Inputs,
        /// Tiling expression in canonical form, e.g. `mhnk` or `mn(k,h)`.
        #[arg(long)]
        expr: String,
        /// Tile sizes as `m=64,n=64,k=512,h=64`.
        #[arg(long)]
        tiles: String,
        /// Print the first N trace events (default 50 when given).
        #[arg(long, num_args = 0..=1, default_missing_value = "50", value_name = "N")]
        trace: Option<usize>,
        /// Dump the scope/order dependency DAG before the counts.
        #[arg(long)]
        dag: bool,
        /// Statement-execution budget.
        #[arg(long, default_value_t = sim::DEFAULT_BUDGET)]
        budget: u64,
    },
    /// Render a kernel skeleton for an explicit candidate, or for the
    /// search winner when no candidate is given.
    Emit {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, requires = "tiles")]
        expr: Option<String>,
        #[arg(long, requires = "expr")]
        tiles: Option<String>,
        /// Search seed used when no explicit candidate is given.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    // Die quietly when a pipe consumer closes early (e.g. `| head`).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TILEFUSE_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                CoreError::Infeasible(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Classify { inputs, tile, explain } => classify(&inputs, tile.as_deref(), explain),
        Command::Enumerate { inputs, count_only, strategies } => {
            enumerate(&inputs, count_only, &strategies)
        }
        Command::Prune { inputs, report } => prune_cmd(&inputs, report.as_deref()),
        Command::Search {
            inputs,
            seed,
            population,
            topk,
            epsilon,
            max_rounds,
            measure,
            emit,
            report,
        } => {
            let config = SearchConfig {
                population_n: population,
                topk_n: topk,
                epsilon,
                rng_seed: seed,
                max_rounds,
            };
            search_cmd(&inputs, &config, &measure, emit, report.as_deref())
        }
        Command::Simulate { inputs, expr, tiles, trace, dag, budget } => {
            simulate_cmd(&inputs, &expr, &tiles, trace, dag, budget)
        }
        Command::Emit { inputs, expr, tiles, seed } => emit_cmd(&inputs, expr, tiles, seed),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CoreError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

fn load(inputs: &Inputs) -> Result<(OperatorChain, HardwareSpec)> {
    let chain = chain::parse_chain(&read(&inputs.chain)?)?;
    let hw = HardwareSpec::parse(&read(&inputs.hw)?)?;
    Ok((chain, hw))
}

fn parse_tiles(chain: &OperatorChain, text: &str) -> Result<TileSizes> {
    let mut pairs = Vec::new();
    for part in text.split(',') {
        let (name, value) = part.split_once('=').ok_or_else(|| CoreError::BadExpression {
            text: text.to_string(),
            msg: "tiles must be comma-separated `axis=size` pairs".into(),
        })?;
        let size: u64 = value.trim().parse().map_err(|_| CoreError::BadExpression {
            text: text.to_string(),
            msg: format!("`{value}` is not a tile size"),
        })?;
        pairs.push((name.trim().to_string(), size));
    }
    TileSizes::from_pairs(chain, &pairs)
}

fn selected_strategies(names: &[String]) -> Result<Vec<Box<dyn TilingStrategy>>> {
    if names.is_empty() {
        return Ok(expr::builtin_strategies());
    }
    names
        .iter()
        .map(|name| {
            expr::strategy_by_name(name).ok_or_else(|| CoreError::BadExpression {
                text: name.clone(),
                msg: "unknown strategy (available: deep, flat)".into(),
            })
        })
        .collect()
}

fn classify(inputs: &Inputs, tile: Option<&str>, explain: bool) -> Result<()> {
    let (chain, hw) = load(inputs)?;
    let tiles = match tile {
        Some(text) => parse_tiles(&chain, text)?,
        None => TileSizes::probe(&chain, &hw, 256),
    };
    if explain {
        println!("# phi = flops per element moved for one output tile, with the");
        println!("# output tile counted twice (accumulator read + write).");
        println!("# phi_output_once counts the output tile a single time; the two");
        println!("# conventions diverge most at large reduction extents: for");
        println!("# 256x256 tiles, phi(k=1024) = 204.800 vs phi_output_once = 227.556,");
        println!("# and phi(k=1) = 0.996 vs 1.984.");
        println!("# An op is memory_bound iff phi < (peak_flops_per_s /");
        println!("# bandwidth_bytes_per_s) * dtype_bytes, strictly.");
    }
    println!("op\tphi\tphi_output_once\tthreshold\tclass\ttiles");
    let rows = chain::classify_ops(&chain, &hw, &tiles);
    for row in &rows {
        println!(
            "{}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}",
            chain.ops()[row.op].name,
            row.phi,
            row.phi_output_once,
            row.threshold,
            row.class,
            tiles.render(&chain)
        );
    }
    println!("chain\t-\t-\t-\t{}\t-", chain::classify_mbci(&chain, &hw, &tiles));
    Ok(())
}

fn enumerate(inputs: &Inputs, count_only: bool, names: &[String]) -> Result<()> {
    let (chain, hw) = load(inputs)?;
    let strategies = selected_strategies(names)?;
    if count_only {
        println!("{}", expr::space_size(&chain, &hw, &strategies));
        return Ok(());
    }
    for strategy in &strategies {
        for e in strategy.enumerate(&chain) {
            println!("{}\t{}", strategy.name(), e.canonical(&chain));
        }
    }
    Ok(())
}

fn prune_cmd(inputs: &Inputs, report_path: Option<&Path>) -> Result<()> {
    let (chain, hw) = load(inputs)?;
    let space = PrunedSpace::new(&chain, &hw, &expr::builtin_strategies())?;
    let report = space.report();
    let tsv = report.to_tsv();
    print!("{tsv}");
    if let Some(path) = report_path {
        std::fs::write(path, &tsv).map_err(|e| CoreError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
    }
    Ok(())
}

fn search_cmd(
    inputs: &Inputs,
    config: &SearchConfig,
    measure: &str,
    emit_winner: bool,
    report_path: Option<&Path>,
) -> Result<()> {
    let (chain, hw) = load(inputs)?;
    let measurer = measure::measurer_by_name(measure).ok_or_else(|| CoreError::BadExpression {
        text: measure.to_string(),
        msg: format!("unknown measurer (available: {})", measure::available_measurers().join(", ")),
    })?;
    let space = PrunedSpace::new(&chain, &hw, &expr::builtin_strategies())?;
    let result = search::search(&space, config, measurer.as_ref())?;
    println!("round\tbest_estimated\tbest_measured\tconverged");
    for row in &result.history {
        println!(
            "{}\t{:e}\t{}\t{}",
            row.round,
            row.best_estimated,
            row.best_measured.map_or_else(|| "-".into(), |t| format!("{t:e}")),
            row.converged
        );
    }
    let winner = &result.best_candidate;
    println!("winner\t{}\t{}\t{:e}", winner.expr_string(), winner.tiles_string(), result.best_measured);
    println!("{}", CostBreakdown::TSV_HEADER);
    println!("{}", model::estimate_time(winner, &hw).tsv_row());
    if emit_winner {
        print!("{}", emit::emit_kernel_skeleton(winner, &hw)?);
    }
    if let Some(path) = report_path {
        let funnel = space.report();
        let text = emit::emit_report(&funnel, Some(&result), &hw);
        std::fs::write(path, text).map_err(|e| CoreError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
    }
    Ok(())
}

fn explicit_candidate(chain: &OperatorChain, hw: &HardwareSpec, expr_text: &str, tiles_text: &str) -> Result<ScheduledCandidate> {
    let parsed = TilingExpr::parse(expr_text, chain)?;
    let tiles = parse_tiles(chain, tiles_text)?;
    tiles.check_legal(chain, hw)?;
    schedule::schedule(&Candidate { expr: parsed, tiles }, chain)
}

fn simulate_cmd(
    inputs: &Inputs,
    expr_text: &str,
    tiles_text: &str,
    trace: Option<usize>,
    dag: bool,
    budget: u64,
) -> Result<()> {
    let (chain, hw) = load(inputs)?;
    let sched = explicit_candidate(&chain, &hw, expr_text, tiles_text)?;
    let nest = sched.lower();
    println!("schedule\t{}", sched.compact_string());
    println!("n_blocks\t{}", sched.n_blocks());
    if dag {
        print!("{}", sched.dag_dump());
    }
    let counts = match trace {
        Some(limit) => {
            let (counts, events) =
                sim::simulate_traced(&nest, budget, limit).map_err(CoreError::Infeasible)?;
            println!("step\tstmt\tscope-indices");
            for ev in &events {
                let indices: Vec<String> = ev
                    .indices
                    .iter()
                    .map(|&(a, i)| format!("{}={i}", sched.axis_name(a)))
                    .collect();
                println!("{}\t{}\t{}", ev.step, sched.statements[ev.stmt].label, indices.join(","));
            }
            counts
        }
        None => sim::simulate(&nest, budget).map_err(CoreError::Infeasible)?,
    };
    println!("bytes_loaded\tbytes_stored\tflops\tpeak_shm");
    println!(
        "{}\t{}\t{}\t{}",
        counts.bytes_loaded, counts.bytes_stored, counts.flops, counts.peak_shm
    );
    println!("stmt\texecutions");
    for (id, stmt) in sched.statements.iter().enumerate() {
        println!("{}\t{}", stmt.label, counts.stmt_exec_counts[id]);
    }
    let cost = sim::measure_cost(&counts, &hw, sched.n_blocks()).map_err(CoreError::Infeasible)?;
    println!("cost\t{cost:e}");
    Ok(())
}

fn emit_cmd(inputs: &Inputs, expr_text: Option<String>, tiles_text: Option<String>, seed: u64) -> Result<()> {
    let (chain, hw) = load(inputs)?;
    let sched = match (expr_text, tiles_text) {
        (Some(e), Some(t)) => explicit_candidate(&chain, &hw, &e, &t)?,
        _ => {
            let space = PrunedSpace::new(&chain, &hw, &expr::builtin_strategies())?;
            let config = SearchConfig { rng_seed: seed, ..SearchConfig::default() };
            let measurer = measure::measurer_by_name("sim").expect("sim is built in");
            search::search(&space, &config, measurer.as_ref())?.best_candidate
        }
    };
    print!("{}", emit::emit_kernel_skeleton(&sched, &hw)?);
    Ok(())
}
