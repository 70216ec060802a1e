//! The offline error prior: per-(timestep, interval) cosine caching errors
//! aggregated over many ground-truth trajectories.
//!
//! For a trajectory with outputs `D(x, t)`, the single-sample caching error
//! of interval `n` at step `t` is the cosine distance between the true
//! output at `t` and the output from the earlier step `t + n`. Averaging
//! over `num_samples` trajectories gives the mean grid; variance is kept
//! alongside for the consistency-band diagnostics.

use crate::error::{CemError, Result};
use crate::surrogate::Trajectory;

/// Mean and variance of the caching error at one (timestep, interval) cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellStats {
    pub mean: f64,
    pub variance: f64,
}

/// T×K grid of mean per-step caching errors with sample variance.
///
/// Cell `(t, n)` is defined only when `t + n <= T`: a caching operation at
/// step `t` with interval `n` needs a computed output at step `t + n`.
/// Undefined cells are stored as an explicit absent marker, never as zero —
/// a zero would masquerade as free caching and corrupt the planner.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMatrix {
    total_steps: usize,
    intervals: Vec<usize>,
    cells: Vec<Option<CellStats>>,
    num_samples: usize,
}

impl ErrorMatrix {
    /// Assemble a matrix from raw cells (row-major over `t = 1..=T` and the
    /// interval index), validating all shape and range invariants.
    pub fn new(
        total_steps: usize,
        intervals: Vec<usize>,
        cells: Vec<Option<CellStats>>,
        num_samples: usize,
    ) -> Result<Self> {
        if total_steps == 0 {
            return Err(CemError::Contract("total_steps must be >= 1".into()));
        }
        validate_intervals(&intervals)?;
        if num_samples == 0 {
            return Err(CemError::Contract("num_samples must be >= 1".into()));
        }
        let k = intervals.len();
        if cells.len() != total_steps * k {
            return Err(CemError::Contract(format!(
                "expected {} cells, got {}",
                total_steps * k,
                cells.len()
            )));
        }
        for t in 1..=total_steps {
            for (ki, &n) in intervals.iter().enumerate() {
                if let Some(stats) = &cells[(t - 1) * k + ki] {
                    if t + n > total_steps {
                        return Err(CemError::Contract(format!(
                            "cell (t={t}, n={n}) lies beyond the last computable step \
                             and must be absent"
                        )));
                    }
                    if !stats.mean.is_finite() || !(0.0..=2.0).contains(&stats.mean) {
                        return Err(CemError::Contract(format!(
                            "mean at (t={t}, n={n}) out of [0, 2]: {}",
                            stats.mean
                        )));
                    }
                    if !stats.variance.is_finite() || stats.variance < 0.0 {
                        return Err(CemError::Contract(format!(
                            "variance at (t={t}, n={n}) negative or non-finite: {}",
                            stats.variance
                        )));
                    }
                }
            }
        }
        Ok(ErrorMatrix {
            total_steps,
            intervals,
            cells,
            num_samples,
        })
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    /// The candidate interval set, strictly increasing.
    pub fn intervals(&self) -> &[usize] {
        &self.intervals
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn interval_index(&self, interval: usize) -> Option<usize> {
        self.intervals.binary_search(&interval).ok()
    }

    pub fn cell(&self, t: usize, interval: usize) -> Option<CellStats> {
        if t == 0 || t > self.total_steps {
            return None;
        }
        let ki = self.interval_index(interval)?;
        self.cells[(t - 1) * self.intervals.len() + ki]
    }

    pub fn mean(&self, t: usize, interval: usize) -> Option<f64> {
        self.cell(t, interval).map(|c| c.mean)
    }

    pub fn variance(&self, t: usize, interval: usize) -> Option<f64> {
        self.cell(t, interval).map(|c| c.variance)
    }

    pub fn defined_cell_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    /// Footprint of the mean grid at half precision: two bytes per grid
    /// entry. This is the in-memory budget a deployment needs to keep the
    /// prior around (a 50-step, 9-interval prior is 900 bytes).
    pub fn payload_bytes(&self) -> usize {
        self.total_steps * self.intervals.len() * 2
    }

    pub(crate) fn cells(&self) -> &[Option<CellStats>] {
        &self.cells
    }
}

pub(crate) fn validate_intervals(intervals: &[usize]) -> Result<()> {
    if intervals.is_empty() {
        return Err(CemError::Contract("interval set must be non-empty".into()));
    }
    if intervals[0] == 0 {
        return Err(CemError::Contract("intervals must be positive".into()));
    }
    if intervals.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CemError::Contract(
            "intervals must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Cosine distance `1 - <a, b> / (|a|·|b|)` between two feature vectors.
/// The result lies in [0, 2]; it is symmetric and invariant under positive
/// scaling of either argument.
pub fn error_entry(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(CemError::Contract(format!(
            "vector lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(CemError::Degenerate(
            "cosine distance needs dimension >= 2".into(),
        ));
    }
    let mut dot = 0.0;
    let mut na2 = 0.0;
    let mut nb2 = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na2 += x * x;
        nb2 += y * y;
    }
    if !dot.is_finite() || !na2.is_finite() || !nb2.is_finite() {
        return Err(CemError::Degenerate("non-finite input vector".into()));
    }
    if na2 == 0.0 || nb2 == 0.0 {
        return Err(CemError::Degenerate(
            "zero-norm vector: cosine distance undefined".into(),
        ));
    }
    if a == b {
        return Ok(0.0);
    }
    let cos = dot / (na2.sqrt() * nb2.sqrt());
    Ok((1.0 - cos).clamp(0.0, 2.0))
}

/// Build the offline prior from fully computed trajectories.
///
/// For each defined `(t, n)` the per-sample errors are accumulated in
/// ascending sample-index order (a deterministic reduction), then reduced to
/// mean and population variance. All trajectories must share a shape and be
/// ground truth — any reused step disqualifies the sample.
pub fn build_error_matrix(trajectories: &[Trajectory], intervals: &[usize]) -> Result<ErrorMatrix> {
    let num_samples = trajectories.len();
    if num_samples == 0 {
        return Err(CemError::Contract(
            "at least one trajectory is required".into(),
        ));
    }
    validate_intervals(intervals)?;
    let total_steps = trajectories[0].total_steps();
    let dimension = trajectories[0].dimension();
    for (i, traj) in trajectories.iter().enumerate() {
        if traj.total_steps() != total_steps || traj.dimension() != dimension {
            return Err(CemError::Contract(format!(
                "trajectory {i} has shape ({}, {}), expected ({total_steps}, {dimension})",
                traj.total_steps(),
                traj.dimension()
            )));
        }
        if !traj.fully_computed() {
            return Err(CemError::Contract(format!(
                "trajectory {i} has reused steps; the prior must come from ground-truth runs"
            )));
        }
    }

    let k = intervals.len();
    let mut cells: Vec<Option<CellStats>> = vec![None; total_steps * k];
    let mut samples = Vec::with_capacity(num_samples);
    for t in 1..=total_steps {
        for (ki, &n) in intervals.iter().enumerate() {
            if t + n > total_steps {
                continue;
            }
            samples.clear();
            for traj in trajectories {
                samples.push(error_entry(traj.output_at(t), traj.output_at(t + n))?);
            }
            let mean = samples.iter().sum::<f64>() / num_samples as f64;
            let variance =
                samples.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / num_samples as f64;
            cells[(t - 1) * k + ki] = Some(CellStats {
                mean: mean.clamp(0.0, 2.0),
                variance: variance.max(0.0),
            });
        }
    }
    ErrorMatrix::new(total_steps, intervals.to_vec(), cells, num_samples)
}

/// Per-interval summary over defined cells. Intervals with no defined cells
/// are omitted.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSummary {
    pub interval: usize,
    pub defined_cells: usize,
    pub mean_of_means: f64,
    pub mean_variance: f64,
    pub min_mean: f64,
    pub max_mean: f64,
}

pub fn matrix_stats(matrix: &ErrorMatrix) -> Vec<IntervalSummary> {
    let k = matrix.intervals().len();
    let mut out = Vec::with_capacity(k);
    for (ki, &n) in matrix.intervals().iter().enumerate() {
        let mut count = 0usize;
        let mut sum_mean = 0.0;
        let mut sum_var = 0.0;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for t in 1..=matrix.total_steps() {
            if let Some(stats) = matrix.cells()[(t - 1) * k + ki] {
                count += 1;
                sum_mean += stats.mean;
                sum_var += stats.variance;
                min = min.min(stats.mean);
                max = max.max(stats.mean);
            }
        }
        if count > 0 {
            out.push(IntervalSummary {
                interval: n,
                defined_cells: count,
                mean_of_means: sum_mean / count as f64,
                mean_variance: sum_var / count as f64,
                min_mean: min,
                max_mean: max,
            });
        }
    }
    out
}

/// Whether observed online errors fall inside the offline band
/// `mean ± k·stddev`, per timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    /// (timestep, inside-band) for every compared point, in input order.
    pub per_timestep: Vec<(usize, bool)>,
    /// Fraction of compared points inside the band.
    pub coverage_fraction: f64,
    pub band_width_k: f64,
}

/// Compare observed per-timestep errors for one interval against the prior's
/// band. Observations at timesteps whose cell is undefined are skipped.
pub fn consistency_check(
    matrix: &ErrorMatrix,
    observed: &[(usize, f64)],
    interval: usize,
    band_width_k: f64,
) -> Result<ConsistencyReport> {
    if matrix.interval_index(interval).is_none() {
        return Err(CemError::Lookup(format!(
            "interval {interval} is not in the candidate set {:?}",
            matrix.intervals()
        )));
    }
    if !band_width_k.is_finite() || band_width_k <= 0.0 {
        return Err(CemError::Contract(format!(
            "band width must be finite and > 0, got {band_width_k}"
        )));
    }
    let mut per_timestep = Vec::new();
    let mut inside = 0usize;
    for &(t, obs) in observed {
        if t == 0 || t > matrix.total_steps() {
            return Err(CemError::Contract(format!(
                "observed timestep {t} outside 1..={}",
                matrix.total_steps()
            )));
        }
        let Some(stats) = matrix.cell(t, interval) else {
            continue;
        };
        let ok = (obs - stats.mean).abs() <= band_width_k * stats.variance.sqrt();
        inside += ok as usize;
        per_timestep.push((t, ok));
    }
    if per_timestep.is_empty() {
        return Err(CemError::Degenerate(
            "no defined cells to compare against".into(),
        ));
    }
    Ok(ConsistencyReport {
        coverage_fraction: inside as f64 / per_timestep.len() as f64,
        per_timestep,
        band_width_k,
    })
}

/// Closed-form sample-count bound `sqrt(ln(2/delta) / (2·num_samples))`:
/// with probability at least `1 - delta`, an empirical mean over
/// `num_samples` draws of a unit-range variable sits within this distance of
/// the true mean. Cosine distances here range over [0, 2] rather than a unit
/// interval, so treat the value as a per-unit-range diagnostic rather than a
/// certified bound.
pub fn hoeffding_bound(delta: f64, num_samples: usize) -> Result<f64> {
    if !delta.is_finite() || delta <= 0.0 || delta >= 1.0 {
        return Err(CemError::Contract(format!(
            "delta must lie strictly inside (0, 1), got {delta}"
        )));
    }
    if num_samples == 0 {
        return Err(CemError::Contract("num_samples must be >= 1".into()));
    }
    Ok(((2.0 / delta).ln() / (2.0 * num_samples as f64)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::Trajectory;

    fn rotating_trajectory(total_steps: usize, theta: f64) -> Trajectory {
        // outputs trace f(t) = [cos(theta·t), sin(theta·t)]
        let outputs: Vec<Vec<f64>> = (1..=total_steps)
            .rev()
            .map(|t| {
                let a = theta * t as f64;
                vec![a.cos(), a.sin()]
            })
            .collect();
        let states = vec![vec![0.5, 0.5]; total_steps + 1];
        Trajectory::from_parts(2, total_steps, states, outputs, vec![true; total_steps]).unwrap()
    }

    #[test]
    fn identity_is_zero() {
        assert_eq!(
            error_entry(&[0.3, -1.2, 4.0], &[0.3, -1.2, 4.0]).unwrap(),
            0.0
        );
    }

    #[test]
    fn orthogonal_is_one() {
        let e = error_entry(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((e - 1.0).abs() < 1e-15);
    }

    #[test]
    fn antipodal_is_two() {
        let e = error_entry(&[1.0, 0.0], &[-1.0, 0.0]).unwrap();
        assert!((e - 2.0).abs() < 1e-15);
    }

    #[test]
    fn quarter_turn_closed_form() {
        // unit vectors rotating by pi/2 per step: distance 1 - cos(n·pi/2)
        let theta = std::f64::consts::FRAC_PI_2;
        for t in 1..40 {
            let a = [(theta * t as f64).cos(), (theta * t as f64).sin()];
            let b = [
                (theta * (t + 2) as f64).cos(),
                (theta * (t + 2) as f64).sin(),
            ];
            let e = error_entry(&a, &b).unwrap();
            assert!((e - 2.0).abs() < 1e-12, "t={t}: {e}");
        }
    }

    #[test]
    fn zero_norm_rejected() {
        let err = error_entry(&[0.0, 0.0], &[1.0, 0.0]).unwrap_err();
        assert!(matches!(err, CemError::Degenerate(_)));
    }

    #[test]
    fn identical_trajectories_zero_variance() {
        let traj = rotating_trajectory(10, 0.3);
        let m = build_error_matrix(&[traj.clone(), traj.clone(), traj], &[1, 2]).unwrap();
        for t in 1..=10 {
            for n in [1, 2] {
                if let Some(v) = m.variance(t, n) {
                    assert_eq!(v, 0.0);
                }
            }
        }
        assert_eq!(m.num_samples(), 3);
    }

    #[test]
    fn rotating_outputs_closed_form_means() {
        let theta = std::f64::consts::FRAC_PI_2;
        let trajs: Vec<Trajectory> = (0..4).map(|_| rotating_trajectory(12, theta)).collect();
        let m = build_error_matrix(&trajs, &[1, 2]).unwrap();
        for t in 1..=12 {
            if let Some(mean) = m.mean(t, 1) {
                assert!((mean - 1.0).abs() < 1e-12, "t={t} n=1: {mean}");
            }
            if let Some(mean) = m.mean(t, 2) {
                assert!((mean - 2.0).abs() < 1e-12, "t={t} n=2: {mean}");
            }
        }
    }

    #[test]
    fn absent_cells_where_no_earlier_compute_exists() {
        let traj = rotating_trajectory(10, 0.3);
        let m = build_error_matrix(&[traj], &[1, 3]).unwrap();
        assert!(m.mean(10, 1).is_none());
        assert!(m.mean(9, 1).is_some());
        assert!(m.mean(8, 3).is_none());
        assert!(m.mean(7, 3).is_some());
        assert_eq!(m.defined_cell_count(), 9 + 7);
    }

    #[test]
    fn fifty_by_nine_payload_under_one_kib() {
        let cells = vec![None; 50 * 9];
        let m = ErrorMatrix::new(50, (1..=9).collect(), cells, 1).unwrap();
        assert_eq!(m.payload_bytes(), 900);
        assert!(m.payload_bytes() < 1024);
    }

    #[test]
    fn mixed_shapes_rejected() {
        let a = rotating_trajectory(10, 0.3);
        let b = rotating_trajectory(11, 0.3);
        let err = build_error_matrix(&[a, b], &[1]).unwrap_err();
        assert!(matches!(err, CemError::Contract(_)));
    }

    #[test]
    fn reused_steps_rejected() {
        let mut mask = vec![true; 10];
        mask[4] = false;
        let outputs = vec![vec![1.0, 0.5]; 10];
        let states = vec![vec![0.0, 1.0]; 11];
        let traj = Trajectory::from_parts(2, 10, states, outputs, mask).unwrap();
        let err = build_error_matrix(&[traj], &[1]).unwrap_err();
        assert!(matches!(err, CemError::Contract(_)));
    }

    #[test]
    fn stats_on_singleton_cells() {
        // T=2 with interval 1: only (t=1, n=1) is defined
        let traj = rotating_trajectory(2, 0.7);
        let m = build_error_matrix(&[traj], &[1]).unwrap();
        let stats = matrix_stats(&m);
        assert_eq!(stats.len(), 1);
        let s = &stats[0];
        assert_eq!(s.defined_cells, 1);
        assert_eq!(s.mean_of_means, s.min_mean);
        assert_eq!(s.mean_of_means, s.max_mean);
        assert_eq!(s.mean_of_means, m.mean(1, 1).unwrap());
    }

    #[test]
    fn stats_on_all_zero_matrix() {
        let k = 2;
        let mut cells = vec![None; 6 * k];
        for t in 1..=6usize {
            for (ki, n) in [1usize, 2].iter().enumerate() {
                if t + n <= 6 {
                    cells[(t - 1) * k + ki] = Some(CellStats {
                        mean: 0.0,
                        variance: 0.0,
                    });
                }
            }
        }
        let m = ErrorMatrix::new(6, vec![1, 2], cells, 4).unwrap();
        for s in matrix_stats(&m) {
            assert_eq!(s.mean_of_means, 0.0);
            assert_eq!(s.mean_variance, 0.0);
            assert_eq!(s.min_mean, 0.0);
            assert_eq!(s.max_mean, 0.0);
        }
    }

    #[test]
    fn consistency_exact_match_full_coverage() {
        let traj = rotating_trajectory(10, 0.4);
        let m = build_error_matrix(&[traj.clone(), traj], &[2]).unwrap();
        let observed: Vec<(usize, f64)> = (1..=8).map(|t| (t, m.mean(t, 2).unwrap())).collect();
        let report = consistency_check(&m, &observed, 2, 3.0).unwrap();
        assert_eq!(report.coverage_fraction, 1.0);
        assert_eq!(report.per_timestep.len(), 8);
    }

    #[test]
    fn consistency_band_exceeded() {
        // two distinct rotating trajectories give nonzero variance
        let a = rotating_trajectory(10, 0.40);
        let b = rotating_trajectory(10, 0.45);
        let m = build_error_matrix(&[a, b], &[2]).unwrap();
        let k = 3.0;
        let observed: Vec<(usize, f64)> = (1..=8)
            .map(|t| {
                let c = m.cell(t, 2).unwrap();
                assert!(c.variance > 0.0);
                (t, c.mean + (k + 1.0) * c.variance.sqrt())
            })
            .collect();
        let report = consistency_check(&m, &observed, 2, k).unwrap();
        assert_eq!(report.coverage_fraction, 0.0);
    }

    #[test]
    fn consistency_unknown_interval() {
        let traj = rotating_trajectory(10, 0.4);
        let m = build_error_matrix(&[traj], &[2]).unwrap();
        let err = consistency_check(&m, &[(1, 0.5)], 3, 2.0).unwrap_err();
        assert!(matches!(err, CemError::Lookup(_)));
    }

    #[test]
    fn hoeffding_reference_value() {
        let b = hoeffding_bound(0.05, 100).unwrap();
        assert!((b - 0.13581).abs() < 1e-4, "{b}");
    }

    #[test]
    fn hoeffding_quadruple_samples_halves_bound() {
        for (delta, n) in [(0.05, 100usize), (0.3, 7), (0.9, 33)] {
            let b1 = hoeffding_bound(delta, n).unwrap();
            let b4 = hoeffding_bound(delta, 4 * n).unwrap();
            assert_eq!(b1 / 2.0, b4);
        }
    }

    #[test]
    fn hoeffding_unit_point() {
        // delta = 2/e^2 makes ln(2/delta) = 2, so the bound at one sample is 1
        let delta = 2.0 / std::f64::consts::E.powi(2);
        let b = hoeffding_bound(delta, 1).unwrap();
        assert!((b - 1.0).abs() < 1e-12, "{b}");
    }

    #[test]
    fn hoeffding_rejects_bad_delta() {
        assert!(hoeffding_bound(0.0, 10).is_err());
        assert!(hoeffding_bound(1.0, 10).is_err());
        assert!(hoeffding_bound(-0.5, 10).is_err());
        assert!(hoeffding_bound(0.5, 0).is_err());
    }
}
