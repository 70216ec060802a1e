//! Fidelity of cache-accelerated runs against full runs, measured
//! accumulated error, and random-schedule sweeps relating planned cost to
//! realized fidelity.

use std::collections::HashSet;

use crate::error::{CemError, Result};
use crate::error_model::error_entry;
use crate::rng::DetRng;
use crate::scheduler::{composition_counts, schedule_cost, CacheSchedule, CumulativeErrorMatrix};
use crate::surrogate::{run_cached, run_full, Denoiser, ExecutionMode, Trajectory};

const SWEEP_STREAM: u64 = 0x53e9;

/// Distances between a cached trajectory and its full-computation reference.
/// The terminal distances are the desk-scale stand-in for image-space
/// fidelity metrics; per-step entries exist only at reused steps.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelityReport {
    pub terminal_cosine_distance: f64,
    pub terminal_relative_l2: f64,
    /// (timestep, cosine distance between the substituted output and the
    /// reference output), in execution order.
    pub per_step_output_distance: Vec<(usize, f64)>,
}

/// Compare a cached run against a fully computed reference from the same
/// initial state.
pub fn fidelity(cached: &Trajectory, reference: &Trajectory) -> Result<FidelityReport> {
    if cached.total_steps() != reference.total_steps()
        || cached.dimension() != reference.dimension()
    {
        return Err(CemError::Contract(format!(
            "shape mismatch: cached ({}, {}) vs reference ({}, {})",
            cached.total_steps(),
            cached.dimension(),
            reference.total_steps(),
            reference.dimension()
        )));
    }
    if !reference.fully_computed() {
        return Err(CemError::Contract(
            "reference trajectory must be fully computed".into(),
        ));
    }
    let terminal_cosine_distance =
        error_entry(cached.terminal_state(), reference.terminal_state())?;
    let diff_norm: f64 = cached
        .terminal_state()
        .iter()
        .zip(reference.terminal_state())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let ref_norm: f64 = reference
        .terminal_state()
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    let terminal_relative_l2 = if diff_norm == 0.0 {
        0.0
    } else if ref_norm == 0.0 {
        return Err(CemError::Degenerate(
            "reference terminal state has zero norm".into(),
        ));
    } else {
        diff_norm / ref_norm
    };
    let total = cached.total_steps();
    let mut per_step_output_distance = Vec::new();
    for t in (1..=total).rev() {
        if !cached.computed_at(t) {
            per_step_output_distance
                .push((t, error_entry(cached.output_at(t), reference.output_at(t))?));
        }
    }
    Ok(FidelityReport {
        terminal_cosine_distance,
        terminal_relative_l2,
        per_step_output_distance,
    })
}

/// Run a straight `interval`-strided cached execution (compute at `T`,
/// `T - interval`, `T - 2·interval`, ... with plain reuse in between) and
/// record the accumulated caching error: at every reuse step, the cosine
/// distance between the output in use and the ground-truth output of a
/// parallel full run from the same seed is added to a running total, and the
/// total so far is recorded at that step. The resulting sequence is the
/// measured counterpart of the cumulative approximation.
pub fn measure_accumulated_error<D: Denoiser>(
    den: &D,
    init_seed: u64,
    interval: usize,
) -> Result<Vec<(usize, f64)>> {
    if interval == 0 {
        return Err(CemError::Contract("interval must be >= 1".into()));
    }
    let total = den.total_steps();
    let full = run_full(den, init_seed)?;
    let sigma_step = den.sigma_increment();

    let mut x = den.initial_state(init_seed);
    let mut cached_output: Vec<f64> = Vec::new();
    let mut measured = Vec::new();
    let mut accumulated = 0.0;
    for t in (1..=total).rev() {
        let reuse = !(total - t).is_multiple_of(interval);
        let d = if reuse {
            cached_output.clone()
        } else {
            let d = den.output(&x, t);
            cached_output = d.clone();
            d
        };
        if d.iter().any(|v| !v.is_finite()) {
            return Err(CemError::Divergence { timestep: t });
        }
        if reuse {
            accumulated += error_entry(&d, full.output_at(t))?;
            measured.push((t, accumulated));
        }
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi -= sigma_step * di;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(CemError::Divergence { timestep: t });
        }
    }
    Ok(measured)
}

/// One scored and executed schedule inside a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub schedule_id: usize,
    pub total_cost: f64,
    pub terminal_cosine_distance: f64,
}

/// Sweep result. `truncated` flags that fewer distinct schedules than
/// requested exist (or were reachable); that is a warning, not an error.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub records: Vec<SweepRecord>,
    pub truncated: bool,
}

/// Sample `count` distinct valid compositions at the given budget
/// (deterministic in `sweep_seed`), score each against the cumulative
/// matrix, execute each with vanilla reuse, and record terminal distances.
///
/// Sampling draws each hop uniformly from the candidates that keep the
/// remainder completable, then rejects duplicate compositions; this keeps
/// coverage and determinism without requiring exact uniformity over the
/// composition space.
pub fn sweep_random_schedules<D: Denoiser>(
    cum: &CumulativeErrorMatrix,
    den: &D,
    init_seed: u64,
    num_caching: usize,
    candidates: &[usize],
    count: usize,
    sweep_seed: u64,
) -> Result<SweepOutcome> {
    if count < 2 {
        return Err(CemError::Contract("sweep count must be >= 2".into()));
    }
    if den.total_steps() != cum.total_steps() {
        return Err(CemError::Contract(format!(
            "denoiser has {} steps but the matrix has {}",
            den.total_steps(),
            cum.total_steps()
        )));
    }
    // structural validation, including feasibility
    let cands = crate::scheduler::validate_instance(cum, num_caching, candidates)?;

    let total = cum.total_steps();
    let span = total - 1;
    let cap = 10_000_000u64;
    let counts = composition_counts(span, num_caching, &cands, cap);
    let distinct = counts[num_caching][span];
    let target = if distinct < cap {
        count.min(distinct as usize)
    } else {
        count
    };

    let weights: Vec<f64> = cands
        .iter()
        .map(|&n| cum.weight_of(n).expect("validated candidate"))
        .collect();
    let full = run_full(den, init_seed)?;
    let mut rng = DetRng::with_stream(sweep_seed, SWEEP_STREAM);
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut records = Vec::with_capacity(target);
    let max_attempts = 1_000 + 50 * target;
    let mut attempts = 0usize;
    let mut feasible = Vec::with_capacity(cands.len());

    while records.len() < target && attempts < max_attempts {
        attempts += 1;
        // sequential draw conditioned on completability
        let mut composition = Vec::with_capacity(num_caching);
        let mut remaining = span;
        for part in (1..=num_caching).rev() {
            feasible.clear();
            for &n in &cands {
                if n <= remaining && counts[part - 1][remaining - n] > 0 {
                    feasible.push(n);
                }
            }
            debug_assert!(!feasible.is_empty(), "feasibility checked up front");
            let pick = feasible[rng.below(feasible.len() as u64) as usize];
            composition.push(pick);
            remaining -= pick;
        }
        debug_assert_eq!(remaining, 0);
        if !seen.insert(composition.clone()) {
            continue;
        }
        let schedule =
            CacheSchedule::new(total, cands.clone(), weights.clone(), composition, None)?;
        let cost = match schedule_cost(&schedule, cum) {
            Ok(c) => c,
            // absent cells make this composition unusable; keep sampling
            Err(CemError::Infeasible { .. }) => continue,
            Err(e) => return Err(e),
        };
        let cached = run_cached(den, init_seed, &schedule, ExecutionMode::Reuse)?;
        let terminal = error_entry(cached.terminal_state(), full.terminal_state())?;
        records.push(SweepRecord {
            schedule_id: records.len(),
            total_cost: cost,
            terminal_cosine_distance: terminal,
        });
    }

    Ok(SweepOutcome {
        truncated: records.len() < count,
        records,
    })
}

fn check_pair(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(CemError::Contract(format!(
            "sequence lengths differ: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(CemError::Contract(
            "correlation needs at least two points".into(),
        ));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(CemError::Contract("non-finite value in sequence".into()));
    }
    Ok(())
}

/// Pearson linear correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys)?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(CemError::UndefinedCorrelation(
            "constant sequence has no correlation".into(),
        ));
    }
    Ok((cov / (vx.sqrt() * vy.sqrt())).clamp(-1.0, 1.0))
}

/// Mean ranks (1-based), ties sharing their average rank.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("finite values"));
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with mean-rank tie handling.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys)?;
    pearson(&ranks(xs), &ranks(ys))
}

/// `|approx - truth| / |truth|`.
pub fn relative_difference(approx: f64, truth: f64) -> Result<f64> {
    if !approx.is_finite() || !truth.is_finite() {
        return Err(CemError::Contract("inputs must be finite".into()));
    }
    if truth == 0.0 {
        return Err(CemError::Degenerate(
            "relative difference against zero is undefined".into(),
        ));
    }
    Ok((approx - truth).abs() / truth.abs())
}
