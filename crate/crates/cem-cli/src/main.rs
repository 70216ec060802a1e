//! `cem` — offline caching-error modeling and cache-schedule planning.
//!
//! Subcommands tie the pipeline together for scripted use: build error
//! priors on the synthetic denoiser, plan budget-constrained schedules,
//! execute and score them against full runs, sweep random schedules, and
//! print the sample-count bound. Status lines go to stderr; machine-readable
//! payloads go to files or stdout. Every run is deterministic in `--seed`.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use cem_core::error_model::{build_error_matrix, hoeffding_bound};
use cem_core::evaluate::{fidelity, spearman, sweep_random_schedules};
use cem_core::scheduler::{
    brute_force_plan, cumulative, dp_plan, linear_schedule, schedule_cost, uniform_schedule,
    CacheSchedule, CumulativeErrorMatrix,
};
use cem_core::store::{
    read_error_matrix, read_schedule, render_fidelity_csv, render_sweep_csv, write_error_matrix,
    write_schedule, FidelityCsvRow,
};
use cem_core::surrogate::{
    make_surrogate, run_cached, run_full, ExecutionMode, Surrogate, SurrogateConfig,
};
use cem_core::{CemError, Result};

#[derive(Parser)]
#[command(
    name = "cem",
    about = "Offline caching-error modeling and cache-schedule planning",
    version
)]
struct Cli {
    /// Base seed for all randomness (matrices, trajectories, sweeps).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output path. Required by `model` and `plan`; `eval` and `sweep`
    /// write to stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Reuse,
    Predict1,
}

impl From<ModeArg> for ExecutionMode {
    fn from(mode: ModeArg) -> Self {
        match mode {
            ModeArg::Reuse => ExecutionMode::Reuse,
            ModeArg::Predict1 => ExecutionMode::PredictOrder1,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build the offline error prior from synthetic denoiser runs.
    Model {
        /// Number of modeling trajectories (seeds seed..seed+samples-1).
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Denoising steps T.
        #[arg(long, default_value_t = 50)]
        steps: usize,
        /// Feature vector length.
        #[arg(long, default_value_t = 64)]
        dim: usize,
        /// Candidate cache intervals, e.g. `1..9` or `1,2,4,8`.
        #[arg(long, default_value = "1..9")]
        intervals: String,
        /// State-coupling strength of the denoiser.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
    /// Plan the minimum-cumulative-error schedule from a stored prior.
    Plan {
        /// Error-matrix file produced by `model` (or another exporter).
        #[arg(long)]
        matrix: PathBuf,
        /// Caching budget N_c (number of cache operations).
        #[arg(long, conflicts_with = "speedup")]
        budget: Option<usize>,
        /// Target speedup ratio; maps to N_c = round(T / ratio) - 1.
        #[arg(long)]
        speedup: Option<f64>,
        /// Candidate intervals; defaults to every interval in the matrix.
        #[arg(long)]
        candidates: Option<String>,
        /// Per-interval weights aligned with the candidate list (default 1).
        #[arg(long)]
        weights: Option<String>,
        /// Cross-check the plan against the exhaustive oracle.
        #[arg(long)]
        oracle: bool,
    },
    /// Execute a schedule on the synthetic denoiser and report fidelity.
    Eval {
        /// Schedule file produced by `plan`.
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long, value_enum, default_value = "reuse")]
        mode: ModeArg,
        /// Baselines to run alongside, e.g. `uniform:2` or `linear:2,4`.
        #[arg(long)]
        baseline: Vec<String>,
        /// Optional error-matrix file for scoring baselines.
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
    /// Sample random schedules at a budget and correlate cost with fidelity.
    Sweep {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        budget: usize,
        /// Number of distinct schedules to sample.
        #[arg(long)]
        count: usize,
        #[arg(long)]
        candidates: Option<String>,
        #[arg(long)]
        weights: Option<String>,
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
    /// Print the sample-count confidence bound for an offline prior.
    Bound {
        /// Confidence parameter in (0, 1).
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        samples: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                CemError::Io(_) | CemError::Parse { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Model {
            samples,
            steps,
            dim,
            intervals,
            scale,
        } => cmd_model(cli.seed, cli.out, samples, steps, dim, &intervals, scale),
        Command::Plan {
            matrix,
            budget,
            speedup,
            candidates,
            weights,
            oracle,
        } => cmd_plan(
            cli.out, &matrix, budget, speedup, candidates, weights, oracle,
        ),
        Command::Eval {
            schedule,
            mode,
            baseline,
            matrix,
            dim,
            scale,
        } => cmd_eval(
            cli.seed, cli.out, &schedule, mode, &baseline, matrix, dim, scale,
        ),
        Command::Sweep {
            matrix,
            budget,
            count,
            candidates,
            weights,
            dim,
            scale,
        } => cmd_sweep(
            cli.seed, cli.out, &matrix, budget, count, candidates, weights, dim, scale,
        ),
        Command::Bound { delta, samples } => {
            let bound = hoeffding_bound(delta, samples)?;
            println!("{}", format_sig(bound, 5));
            Ok(())
        }
    }
}

fn required_out(out: Option<PathBuf>) -> Result<PathBuf> {
    out.ok_or_else(|| CemError::Contract("--out is required for this subcommand".into()))
}

/// Parse `1..9` (inclusive) or a comma-separated list.
fn parse_intervals(text: &str) -> Result<Vec<usize>> {
    let bad = |detail: String| CemError::Contract(format!("invalid interval list: {detail}"));
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad(format!("`{lo}`")))?;
        let hi: usize = hi.trim().parse().map_err(|_| bad(format!("`{hi}`")))?;
        if lo == 0 || hi < lo {
            return Err(bad(format!("range {lo}..{hi}")));
        }
        return Ok((lo..=hi).collect());
    }
    let mut out = Vec::new();
    for part in text.split(',') {
        let n: usize = part.trim().parse().map_err(|_| bad(format!("`{part}`")))?;
        out.push(n);
    }
    Ok(out)
}

fn parse_weights(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|_| CemError::Contract(format!("invalid weight `{part}`")))
        })
        .collect()
}

/// Round to `sig` significant digits and render plainly.
fn format_sig(value: f64, sig: usize) -> String {
    if value == 0.0 {
        return "0".into();
    }
    let exponent = value.abs().log10().floor() as i32;
    let decimals = (sig as i32 - 1 - exponent).max(0) as usize;
    format!("{value:.decimals$}")
}

fn surrogate_from(seed: u64, steps: usize, dim: usize, scale: f64) -> Result<Surrogate> {
    make_surrogate(SurrogateConfig {
        dimension: dim,
        total_steps: steps,
        seed,
        nonlinearity_scale: scale,
        ..SurrogateConfig::default()
    })
}

fn cmd_model(
    seed: u64,
    out: Option<PathBuf>,
    samples: usize,
    steps: usize,
    dim: usize,
    intervals: &str,
    scale: f64,
) -> Result<()> {
    let out = required_out(out)?;
    if samples == 0 {
        return Err(CemError::Contract("--samples must be >= 1".into()));
    }
    let intervals = parse_intervals(intervals)?;
    let surrogate = surrogate_from(seed, steps, dim, scale)?;

    let started = Instant::now();
    let trajectories: Result<Vec<_>> = (0..samples as u64)
        .map(|i| run_full(&surrogate, seed.wrapping_add(i)))
        .collect();
    let matrix = build_error_matrix(&trajectories?, &intervals)?;
    write_error_matrix(&matrix, &out)?;
    let elapsed = started.elapsed();

    let file_bytes = std::fs::metadata(&out)?.len();
    eprintln!(
        "modeled {}x{} prior from {} trajectories in {:.2?}; payload {} B, file {} B -> {}",
        matrix.total_steps(),
        matrix.intervals().len(),
        matrix.num_samples(),
        elapsed,
        matrix.payload_bytes(),
        file_bytes,
        out.display()
    );
    Ok(())
}

fn cmd_plan(
    out: Option<PathBuf>,
    matrix_path: &std::path::Path,
    budget: Option<usize>,
    speedup: Option<f64>,
    candidates: Option<String>,
    weights: Option<String>,
    oracle: bool,
) -> Result<()> {
    let out = required_out(out)?;
    let matrix = read_error_matrix(matrix_path)?;
    let total_steps = matrix.total_steps();

    let num_caching = match (budget, speedup) {
        (Some(b), None) => b,
        (None, Some(s)) => {
            if !s.is_finite() || s <= 1.0 {
                return Err(CemError::Contract(format!(
                    "--speedup must be > 1, got {s}"
                )));
            }
            let mapped = (total_steps as f64 / s).round() as usize;
            let budget = mapped.saturating_sub(1).max(1);
            eprintln!("speedup {s} over {total_steps} steps -> budget N_c = {budget}");
            budget
        }
        _ => {
            return Err(CemError::Contract(
                "exactly one of --budget or --speedup is required".into(),
            ))
        }
    };

    let candidates = match candidates {
        Some(text) => parse_intervals(&text)?,
        None => matrix.intervals().to_vec(),
    };
    let weight_list = match weights {
        Some(text) => {
            let parsed = parse_weights(&text)?;
            if parsed.len() != candidates.len() {
                return Err(CemError::Contract(format!(
                    "{} weights given for {} candidates",
                    parsed.len(),
                    candidates.len()
                )));
            }
            parsed
        }
        None => vec![1.0; candidates.len()],
    };
    // weights align with the matrix intervals; candidate columns get theirs,
    // everything else keeps weight 1
    let matrix_weights: Vec<f64> = matrix
        .intervals()
        .iter()
        .map(|n| {
            candidates
                .iter()
                .position(|c| c == n)
                .map_or(1.0, |i| weight_list[i])
        })
        .collect();
    let cum = cumulative(&matrix, &matrix_weights)?;

    let started = Instant::now();
    let plan = dp_plan(&cum, num_caching, &candidates)?;
    let elapsed = started.elapsed();

    if oracle {
        match brute_force_plan(&cum, num_caching, &candidates) {
            Ok(reference) => {
                let (a, b) = (
                    plan.total_cost().expect("planned cost"),
                    reference.total_cost().expect("oracle cost"),
                );
                if (a - b).abs() > 1e-9 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE) {
                    return Err(CemError::Contract(format!(
                        "oracle mismatch: dp cost {a} vs exhaustive cost {b}"
                    )));
                }
                eprintln!("oracle agreement: exhaustive cost {b}");
            }
            Err(CemError::InstanceTooLarge { guard }) => {
                eprintln!("oracle skipped: more than {guard} compositions");
            }
            Err(other) => return Err(other),
        }
    }

    write_schedule(&plan, &out)?;
    eprintln!(
        "planned {} hops over {} steps, cost {} in {:.2?} -> {}",
        plan.num_caching(),
        total_steps,
        plan.total_cost().expect("planned cost"),
        elapsed,
        out.display()
    );
    Ok(())
}

fn parse_baseline(text: &str, total_steps: usize) -> Result<(String, CacheSchedule)> {
    let bad = || {
        CemError::Contract(format!(
            "invalid baseline `{text}`; expected uniform:<n> or linear:<a>,<b>"
        ))
    };
    let (kind, args) = text.split_once(':').ok_or_else(bad)?;
    match kind {
        "uniform" => {
            let n: usize = args.trim().parse().map_err(|_| bad())?;
            Ok((format!("uniform:{n}"), uniform_schedule(total_steps, n)?))
        }
        "linear" => {
            let (a, b) = args.split_once(',').ok_or_else(bad)?;
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b.trim().parse().map_err(|_| bad())?;
            // keep the CSV label comma-free
            Ok((
                format!("linear:{a}-{b}"),
                linear_schedule(total_steps, a, b)?,
            ))
        }
        _ => Err(bad()),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    seed: u64,
    out: Option<PathBuf>,
    schedule_path: &std::path::Path,
    mode: ModeArg,
    baselines: &[String],
    matrix: Option<PathBuf>,
    dim: usize,
    scale: f64,
) -> Result<()> {
    let schedule = read_schedule(schedule_path)?;
    let total_steps = schedule.total_steps();

    let cum: Option<CumulativeErrorMatrix> = match matrix {
        Some(path) => {
            let m = read_error_matrix(&path)?;
            if m.total_steps() != total_steps {
                return Err(CemError::Contract(format!(
                    "matrix covers {} steps but the schedule has {}",
                    m.total_steps(),
                    total_steps
                )));
            }
            Some(cumulative(&m, &vec![1.0; m.intervals().len()])?)
        }
        None => None,
    };

    let surrogate = surrogate_from(seed, total_steps, dim, scale)?;
    let full = run_full(&surrogate, seed)?;

    let mut runs = vec![("plan".to_string(), schedule)];
    for text in baselines {
        runs.push(parse_baseline(text, total_steps)?);
    }

    let mode_label = match mode {
        ModeArg::Reuse => "reuse",
        ModeArg::Predict1 => "predict1",
    };
    let mut rows = Vec::with_capacity(runs.len());
    for (label, plan) in &runs {
        let cached = run_cached(&surrogate, seed, plan, ExecutionMode::from(mode))?;
        let report = fidelity(&cached, &full)?;
        let total_cost = match &cum {
            Some(cum) => Some(schedule_cost(plan, cum)?),
            None => plan.total_cost(),
        };
        rows.push(FidelityCsvRow {
            label: label.clone(),
            mode: mode_label.to_string(),
            num_caching: plan.num_caching(),
            total_cost,
            terminal_cosine_distance: report.terminal_cosine_distance,
            terminal_relative_l2: report.terminal_relative_l2,
        });
    }

    emit(out, &render_fidelity_csv(&rows))
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    seed: u64,
    out: Option<PathBuf>,
    matrix_path: &std::path::Path,
    budget: usize,
    count: usize,
    candidates: Option<String>,
    weights: Option<String>,
    dim: usize,
    scale: f64,
) -> Result<()> {
    let matrix = read_error_matrix(matrix_path)?;
    let candidates = match candidates {
        Some(text) => parse_intervals(&text)?,
        None => matrix.intervals().to_vec(),
    };
    let matrix_weights: Vec<f64> = match weights {
        Some(text) => {
            let parsed = parse_weights(&text)?;
            if parsed.len() != candidates.len() {
                return Err(CemError::Contract(format!(
                    "{} weights given for {} candidates",
                    parsed.len(),
                    candidates.len()
                )));
            }
            matrix
                .intervals()
                .iter()
                .map(|n| {
                    candidates
                        .iter()
                        .position(|c| c == n)
                        .map_or(1.0, |i| parsed[i])
                })
                .collect()
        }
        None => vec![1.0; matrix.intervals().len()],
    };
    let cum = cumulative(&matrix, &matrix_weights)?;
    let surrogate = surrogate_from(seed, matrix.total_steps(), dim, scale)?;

    let outcome = sweep_random_schedules(&cum, &surrogate, seed, budget, &candidates, count, seed)?;
    if outcome.truncated {
        eprintln!(
            "warning: only {} distinct schedules were reachable (requested {count})",
            outcome.records.len()
        );
    }
    let costs: Vec<f64> = outcome.records.iter().map(|r| r.total_cost).collect();
    let distances: Vec<f64> = outcome
        .records
        .iter()
        .map(|r| r.terminal_cosine_distance)
        .collect();
    let rho = match spearman(&costs, &distances) {
        Ok(rho) => Some(rho),
        Err(CemError::UndefinedCorrelation(reason)) => {
            eprintln!("warning: rank correlation undefined ({reason})");
            None
        }
        Err(other) => return Err(other),
    };

    emit(out, &render_sweep_csv(&outcome, rho))
}

fn emit(out: Option<PathBuf>, payload: &str) -> Result<()> {
    match out {
        Some(path) => {
            cem_core::store::atomic_write(&path, payload)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        None => {
            print!("{payload}");
            Ok(())
        }
    }
}
