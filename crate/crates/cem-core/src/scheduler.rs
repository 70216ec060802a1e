//! Cumulative error approximation and budget-constrained schedule planning.
//!
//! The planner walks the denoising axis from step `T` down to step 1 in
//! exactly `num_caching` hops, each hop's length drawn from a candidate
//! interval set. A hop arriving at step `t` with interval `n` costs the
//! cumulative error `E*(t, n)` — the weighted running sum of the offline
//! per-step errors from `T` down to `t`. Dynamic programming over
//! (timestep, hops-used) finds the composition with the minimum total cost;
//! a brute-force enumerator serves as an independent oracle.

use crate::error::{CemError, Result};
use crate::error_model::ErrorMatrix;

/// Guard on exhaustive enumeration: instances with more compositions than
/// this are rejected by [`brute_force_plan`].
pub const ORACLE_GUARD: u64 = 10_000_000;

/// Weighted running integral of an [`ErrorMatrix`] along the timestep axis.
///
/// `value(t, n) = w(n) · Σ_{s=t..T} mean(s, n)` over defined cells, read in
/// denoising order `T → 1`. Cells absent in the source stay absent here, so
/// every defined column is non-decreasing toward step 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeErrorMatrix {
    total_steps: usize,
    intervals: Vec<usize>,
    weights: Vec<f64>,
    values: Vec<Option<f64>>,
    num_samples: usize,
}

impl CumulativeErrorMatrix {
    /// Assemble directly from cells. Intended for planner tests and synthetic
    /// cost landscapes; [`cumulative`] is the production path and guarantees
    /// column monotonicity on top of these checks.
    pub fn from_cells(
        total_steps: usize,
        intervals: Vec<usize>,
        weights: Vec<f64>,
        values: Vec<Option<f64>>,
        num_samples: usize,
    ) -> Result<Self> {
        if total_steps == 0 {
            return Err(CemError::Contract("total_steps must be >= 1".into()));
        }
        crate::error_model::validate_intervals(&intervals)?;
        validate_weights(&weights, intervals.len())?;
        if values.len() != total_steps * intervals.len() {
            return Err(CemError::Contract(format!(
                "expected {} cumulative cells, got {}",
                total_steps * intervals.len(),
                values.len()
            )));
        }
        if values.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CemError::Contract(
                "cumulative cells must be finite and non-negative".into(),
            ));
        }
        Ok(CumulativeErrorMatrix {
            total_steps,
            intervals,
            weights,
            values,
            num_samples,
        })
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    pub fn intervals(&self) -> &[usize] {
        &self.intervals
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn interval_index(&self, interval: usize) -> Option<usize> {
        self.intervals.binary_search(&interval).ok()
    }

    pub fn weight_of(&self, interval: usize) -> Option<f64> {
        self.interval_index(interval).map(|ki| self.weights[ki])
    }

    /// Cumulative cost of arriving at step `t` with interval `n`; `None`
    /// when the cell is absent or the interval unknown.
    pub fn value(&self, t: usize, interval: usize) -> Option<f64> {
        if t == 0 || t > self.total_steps {
            return None;
        }
        let ki = self.interval_index(interval)?;
        self.values[(t - 1) * self.intervals.len() + ki]
    }
}

fn validate_weights(weights: &[f64], k: usize) -> Result<()> {
    if weights.len() != k {
        return Err(CemError::Contract(format!(
            "expected {k} weights (one per interval), got {}",
            weights.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
        return Err(CemError::Contract("weights must be finite and > 0".into()));
    }
    Ok(())
}

/// Integrate an error matrix into cumulative costs, one weight per interval
/// (aligned with `matrix.intervals()`).
pub fn cumulative(matrix: &ErrorMatrix, weights: &[f64]) -> Result<CumulativeErrorMatrix> {
    let k = matrix.intervals().len();
    validate_weights(weights, k)?;
    let total = matrix.total_steps();
    let mut values = vec![None; total * k];
    for (ki, &n) in matrix.intervals().iter().enumerate() {
        let w = weights[ki];
        let mut running = 0.0;
        for t in (1..=total).rev() {
            if let Some(mean) = matrix.mean(t, n) {
                running += mean;
                values[(t - 1) * k + ki] = Some(w * running);
            }
        }
    }
    CumulativeErrorMatrix::from_cells(
        total,
        matrix.intervals().to_vec(),
        weights.to_vec(),
        values,
        matrix.num_samples(),
    )
}

/// An ordered sequence of cache intervals partitioning a denoising run.
///
/// Intervals apply from step `T` downward, sum to `T - 1`, and induce
/// `num_caching + 1` compute steps (both endpoints computed).
#[derive(Debug, Clone, PartialEq)]
pub struct CacheSchedule {
    total_steps: usize,
    candidates: Vec<usize>,
    weights: Vec<f64>,
    intervals: Vec<usize>,
    compute_steps: Vec<usize>,
    total_cost: Option<f64>,
}

impl CacheSchedule {
    pub fn new(
        total_steps: usize,
        candidates: Vec<usize>,
        weights: Vec<f64>,
        intervals: Vec<usize>,
        total_cost: Option<f64>,
    ) -> Result<Self> {
        if total_steps < 2 {
            return Err(CemError::Contract("total_steps must be >= 2".into()));
        }
        crate::error_model::validate_intervals(&candidates)?;
        validate_weights(&weights, candidates.len())?;
        if intervals.is_empty() {
            return Err(CemError::Contract(
                "a schedule needs at least one interval".into(),
            ));
        }
        for &n in &intervals {
            if candidates.binary_search(&n).is_err() {
                return Err(CemError::Contract(format!(
                    "interval {n} is not in the candidate set {candidates:?}"
                )));
            }
        }
        let sum: usize = intervals.iter().sum();
        if sum != total_steps - 1 {
            return Err(CemError::Contract(format!(
                "intervals sum to {sum}, expected total_steps - 1 = {}",
                total_steps - 1
            )));
        }
        if let Some(cost) = total_cost {
            if !cost.is_finite() || cost < 0.0 {
                return Err(CemError::Contract(format!(
                    "total_cost must be finite and non-negative, got {cost}"
                )));
            }
        }
        let compute_steps = derive_compute_steps(total_steps, &intervals);
        Ok(CacheSchedule {
            total_steps,
            candidates,
            weights,
            intervals,
            compute_steps,
            total_cost,
        })
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    /// Number of caching operations — the budget `N_c`.
    pub fn num_caching(&self) -> usize {
        self.intervals.len()
    }

    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Hop lengths in execution order, from step `T` downward.
    pub fn intervals(&self) -> &[usize] {
        &self.intervals
    }

    /// Steps with a full model evaluation, strictly descending from `T`
    /// to 1; `num_caching + 1` entries.
    pub fn compute_steps(&self) -> &[usize] {
        &self.compute_steps
    }

    pub fn total_cost(&self) -> Option<f64> {
        self.total_cost
    }

    pub fn with_cost(mut self, cost: f64) -> Self {
        self.total_cost = Some(cost);
        self
    }
}

pub(crate) fn derive_compute_steps(total_steps: usize, intervals: &[usize]) -> Vec<usize> {
    let mut steps = Vec::with_capacity(intervals.len() + 1);
    let mut t = total_steps;
    steps.push(t);
    for &n in intervals {
        t -= n;
        steps.push(t);
    }
    steps
}

/// Number of ordered compositions of `total` into `parts` parts drawn from
/// `candidates`, with every table entry clamped at `cap` so huge instances
/// cannot overflow. `counts[p][s]` is the clamped count for sum `s` with `p`
/// parts.
pub(crate) fn composition_counts(
    total: usize,
    parts: usize,
    candidates: &[usize],
    cap: u64,
) -> Vec<Vec<u64>> {
    let mut counts = vec![vec![0u64; total + 1]; parts + 1];
    counts[0][0] = 1;
    for p in 1..=parts {
        for s in 1..=total {
            let mut acc: u64 = 0;
            for &n in candidates {
                if n > s {
                    break; // candidates are ascending
                }
                acc = acc.saturating_add(counts[p - 1][s - n]);
                if acc >= cap {
                    acc = cap;
                    break;
                }
            }
            counts[p][s] = acc;
        }
    }
    counts
}

/// Clamped composition count for one instance.
pub fn count_compositions(total: usize, parts: usize, candidates: &[usize], cap: u64) -> u64 {
    if parts == 0 {
        return (total == 0) as u64;
    }
    composition_counts(total, parts, candidates, cap)[parts][total]
}

/// Sorted, deduplicated candidate set, checked against the matrix and the
/// budget's structural feasibility.
pub(crate) fn validate_instance(
    cum: &CumulativeErrorMatrix,
    num_caching: usize,
    candidates: &[usize],
) -> Result<Vec<usize>> {
    if candidates.is_empty() {
        return Err(CemError::Contract("candidate set must be non-empty".into()));
    }
    let mut cands = candidates.to_vec();
    cands.sort_unstable();
    cands.dedup();
    if cands[0] == 0 {
        return Err(CemError::Contract(
            "candidate intervals must be >= 1".into(),
        ));
    }
    for &n in &cands {
        if cum.interval_index(n).is_none() {
            return Err(CemError::Lookup(format!(
                "candidate interval {n} has no column in the matrix {:?}",
                cum.intervals()
            )));
        }
    }
    let total = cum.total_steps();
    let infeasible = |detail: &str| CemError::Infeasible {
        total_steps: total,
        num_caching,
        candidates: cands.clone(),
        detail: detail.into(),
    };
    if total < 2 {
        return Err(infeasible("nowhere to hop with fewer than 2 steps"));
    }
    if num_caching == 0 || num_caching > total - 1 {
        return Err(infeasible(
            "budget must satisfy 1 <= num_caching <= total_steps - 1",
        ));
    }
    if count_compositions(total - 1, num_caching, &cands, 1) == 0 {
        return Err(infeasible(
            "no composition of total_steps - 1 into num_caching candidate intervals exists",
        ));
    }
    Ok(cands)
}

/// The dynamic-programming table: `cost(t, j)` is the minimum total
/// cumulative error of reaching step `t` from step `T` in exactly `j` hops
/// (`None` where unreachable), and `predecessor(t, j)` records the source
/// step and interval of the optimal arrival.
#[derive(Debug, Clone)]
pub struct DpTable {
    total_steps: usize,
    num_caching: usize,
    cost: Vec<Option<f64>>,
    predecessor: Vec<Option<(usize, usize)>>,
}

impl DpTable {
    fn idx(&self, t: usize, j: usize) -> usize {
        t * (self.num_caching + 1) + j
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    pub fn num_caching(&self) -> usize {
        self.num_caching
    }

    pub fn cost(&self, t: usize, j: usize) -> Option<f64> {
        self.cost[self.idx(t, j)]
    }

    pub fn predecessor(&self, t: usize, j: usize) -> Option<(usize, usize)> {
        self.predecessor[self.idx(t, j)]
    }
}

/// Fill the DP table for an already validated instance.
///
/// Transition: `cost(t, j) = min over n of { E*(t, n) + cost(t + n, j - 1) }`
/// with candidates tried in ascending order and strict-improvement updates,
/// so ties resolve deterministically toward the first candidate reached.
fn fill_dp_table(cum: &CumulativeErrorMatrix, num_caching: usize, cands: &[usize]) -> DpTable {
    let total = cum.total_steps();
    let mut table = DpTable {
        total_steps: total,
        num_caching,
        cost: vec![None; (total + 1) * (num_caching + 1)],
        predecessor: vec![None; (total + 1) * (num_caching + 1)],
    };
    let start = table.idx(total, 0);
    table.cost[start] = Some(0.0);
    for j in 1..=num_caching {
        // a j-hop path has consumed at least j steps
        for t in (1..=total.saturating_sub(j)).rev() {
            let mut best: Option<(f64, usize, usize)> = None;
            for &n in cands {
                let src = t + n;
                if src > total {
                    break;
                }
                let Some(src_cost) = table.cost[table.idx(src, j - 1)] else {
                    continue;
                };
                let Some(cell) = cum.value(t, n) else {
                    continue;
                };
                let candidate_cost = src_cost + cell;
                if best.is_none_or(|(c, _, _)| candidate_cost < c) {
                    best = Some((candidate_cost, src, n));
                }
            }
            if let Some((cost, src, n)) = best {
                let i = table.idx(t, j);
                table.cost[i] = Some(cost);
                table.predecessor[i] = Some((src, n));
            }
        }
    }
    table
}

/// Solve the DP for inspection without backtracking into a schedule.
pub fn solve_dp(
    cum: &CumulativeErrorMatrix,
    num_caching: usize,
    candidates: &[usize],
) -> Result<DpTable> {
    let cands = validate_instance(cum, num_caching, candidates)?;
    Ok(fill_dp_table(cum, num_caching, &cands))
}

/// Plan the minimum-cumulative-error schedule for the given budget.
///
/// Returns the composition of `total_steps - 1` into `num_caching` candidate
/// intervals minimizing the summed cumulative cost, recovered by backtracking
/// the predecessor chain. Among equal-cost plans the first one reached under
/// ascending-candidate iteration wins.
pub fn dp_plan(
    cum: &CumulativeErrorMatrix,
    num_caching: usize,
    candidates: &[usize],
) -> Result<CacheSchedule> {
    let cands = validate_instance(cum, num_caching, candidates)?;
    let table = fill_dp_table(cum, num_caching, &cands);
    let Some(total_cost) = table.cost(1, num_caching) else {
        return Err(CemError::Infeasible {
            total_steps: cum.total_steps(),
            num_caching,
            candidates: cands,
            detail: "every feasible composition crosses an absent cumulative cell".into(),
        });
    };
    let mut rev_intervals = Vec::with_capacity(num_caching);
    let (mut t, mut j) = (1usize, num_caching);
    while j > 0 {
        let (src, n) = table
            .predecessor(t, j)
            .expect("finite DP cell always records its predecessor");
        rev_intervals.push(n);
        t = src;
        j -= 1;
    }
    debug_assert_eq!(t, cum.total_steps());
    rev_intervals.reverse();
    let weights = cands
        .iter()
        .map(|&n| {
            cum.weight_of(n)
                .expect("candidate validated against matrix")
        })
        .collect();
    CacheSchedule::new(
        cum.total_steps(),
        cands,
        weights,
        rev_intervals,
        Some(total_cost),
    )
}

/// Exhaustive planning oracle: enumerates every ordered composition and
/// returns the cheapest, ties broken by lexicographically smallest interval
/// sequence. Guarded by [`ORACLE_GUARD`].
pub fn brute_force_plan(
    cum: &CumulativeErrorMatrix,
    num_caching: usize,
    candidates: &[usize],
) -> Result<CacheSchedule> {
    let cands = validate_instance(cum, num_caching, candidates)?;
    let total = cum.total_steps();
    if count_compositions(total - 1, num_caching, &cands, ORACLE_GUARD + 1) > ORACLE_GUARD {
        return Err(CemError::InstanceTooLarge {
            guard: ORACLE_GUARD,
        });
    }

    struct Search<'a> {
        cum: &'a CumulativeErrorMatrix,
        cands: &'a [usize],
        min_c: usize,
        max_c: usize,
        best: Option<(f64, Vec<usize>)>,
        prefix: Vec<usize>,
    }

    impl Search<'_> {
        // arrive_from: the step we are hopping away from
        fn dfs(
            &mut self,
            arrive_from: usize,
            remaining_sum: usize,
            remaining_parts: usize,
            cost: f64,
        ) {
            if remaining_parts == 0 {
                if remaining_sum == 0 && self.best.as_ref().is_none_or(|(c, _)| cost < *c) {
                    self.best = Some((cost, self.prefix.clone()));
                }
                return;
            }
            // a cheaper completion is impossible: costs are non-negative
            if let Some((best_cost, _)) = &self.best {
                if cost >= *best_cost {
                    return;
                }
            }
            let rest = remaining_parts - 1;
            for &n in self.cands {
                if n > remaining_sum {
                    break;
                }
                let after = remaining_sum - n;
                if after < rest * self.min_c || after > rest * self.max_c {
                    continue;
                }
                let arrival = arrive_from - n;
                let Some(cell) = self.cum.value(arrival, n) else {
                    continue;
                };
                self.prefix.push(n);
                self.dfs(arrival, after, rest, cost + cell);
                self.prefix.pop();
            }
        }
    }

    let mut search = Search {
        cum,
        cands: &cands,
        min_c: cands[0],
        max_c: *cands.last().expect("validated non-empty"),
        best: None,
        prefix: Vec::with_capacity(num_caching),
    };
    search.dfs(total, total - 1, num_caching, 0.0);

    let Some((cost, intervals)) = search.best else {
        return Err(CemError::Infeasible {
            total_steps: total,
            num_caching,
            candidates: cands,
            detail: "every feasible composition crosses an absent cumulative cell".into(),
        });
    };
    let weights = cands
        .iter()
        .map(|&n| {
            cum.weight_of(n)
                .expect("candidate validated against matrix")
        })
        .collect();
    CacheSchedule::new(total, cands, weights, intervals, Some(cost))
}

/// Fixed-interval baseline: hops of length `interval` from step `T`, with
/// the final hop shortened to land exactly on step 1.
pub fn uniform_schedule(total_steps: usize, interval: usize) -> Result<CacheSchedule> {
    if total_steps < 2 {
        return Err(CemError::Contract("total_steps must be >= 2".into()));
    }
    if interval == 0 {
        return Err(CemError::Contract("interval must be >= 1".into()));
    }
    if interval >= total_steps {
        return Err(CemError::Contract(format!(
            "interval {interval} must be smaller than total_steps {total_steps}"
        )));
    }
    let span = total_steps - 1;
    let mut intervals = vec![interval; span / interval];
    let remainder = span % interval;
    if remainder > 0 {
        intervals.push(remainder);
    }
    let mut candidates: Vec<usize> = intervals.clone();
    candidates.sort_unstable();
    candidates.dedup();
    let weights = vec![1.0; candidates.len()];
    CacheSchedule::new(total_steps, candidates, weights, intervals, None)
}

/// Linearly varying baseline: hop lengths interpolate from `start_interval`
/// at step `T` to `end_interval` near step 1 (rounded, clamped to 1), with
/// the final hop absorbing the residue so the hops sum to `T - 1`.
pub fn linear_schedule(
    total_steps: usize,
    start_interval: usize,
    end_interval: usize,
) -> Result<CacheSchedule> {
    if total_steps < 2 {
        return Err(CemError::Contract("total_steps must be >= 2".into()));
    }
    if start_interval == 0 || end_interval == 0 {
        return Err(CemError::Contract(
            "interpolation endpoints must be >= 1".into(),
        ));
    }
    let span = total_steps - 1;
    let mut intervals = Vec::new();
    let mut covered = 0usize;
    while covered < span {
        let progress = covered as f64 / span as f64;
        let ideal =
            start_interval as f64 + (end_interval as f64 - start_interval as f64) * progress;
        let hop = (ideal.round() as usize).max(1).min(span - covered);
        intervals.push(hop);
        covered += hop;
    }
    let mut candidates: Vec<usize> = intervals.clone();
    candidates.sort_unstable();
    candidates.dedup();
    let weights = vec![1.0; candidates.len()];
    CacheSchedule::new(total_steps, candidates, weights, intervals, None)
}

/// Score a schedule against a cumulative matrix: the sum over hops of the
/// cumulative error at each arrival step.
pub fn schedule_cost(schedule: &CacheSchedule, cum: &CumulativeErrorMatrix) -> Result<f64> {
    if schedule.total_steps() != cum.total_steps() {
        return Err(CemError::Contract(format!(
            "schedule covers {} steps but the matrix has {}",
            schedule.total_steps(),
            cum.total_steps()
        )));
    }
    let mut t = schedule.total_steps();
    let mut cost = 0.0;
    for &n in schedule.intervals() {
        t -= n;
        let Some(cell) = cum.value(t, n) else {
            return Err(CemError::Infeasible {
                total_steps: cum.total_steps(),
                num_caching: schedule.num_caching(),
                candidates: schedule.candidates().to_vec(),
                detail: format!("required cumulative cell (t={t}, n={n}) is absent"),
            });
        };
        cost += cell;
    }
    Ok(cost)
}
