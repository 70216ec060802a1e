//! Synthetic denoiser surrogate with full and cache-accelerated execution.
//!
//! The surrogate stands in for a diffusion model at desk scale: a seedable
//! deterministic map `D(x, t) = M2 · tanh(scale · M1·x + c(t))` driven by a
//! linear noise-level schedule. It is cheap enough to run thousands of
//! trajectories, yet its outputs drift at timestep-dependent rates, so the
//! caching-error landscape has real structure for the planner to exploit.

use crate::error::{CemError, Result};
use crate::rng::DetRng;
use crate::scheduler::CacheSchedule;

const MATRIX_STREAM: u64 = 0x5157;
const INIT_STREAM: u64 = 0x1a17;

// Timestep embedding: a sin/cos bank whose phase advances at rates spread
// across [EMBED_RATE_LO, EMBED_RATE_HI] radians per step under a Gaussian
// amplitude envelope peaked at the content milestones (EMBED_MILESTONES,
// as fractions of the schedule), plus a phase jump of EMBED_JUMP radians at
// each milestone. Between milestones outputs barely move; approaching one,
// drift accelerates so caching error grows superlinearly with the cache
// interval; and serving a cached output across a milestone itself costs a
// fixed transition error. This mirrors how denoising runs concentrate
// content formation in a few transition phases.
const EMBED_RATE_LO: f64 = 0.20;
const EMBED_RATE_HI: f64 = 0.30;
const EMBED_AMPLITUDE: f64 = 1.2;
const EMBED_JUMP: f64 = 0.6;
const EMBED_WIDTH: f64 = 2.5;
const EMBED_FLOOR: f64 = 0.05;
const EMBED_MILESTONES: [f64; 3] = [0.18, 0.30, 0.42];

/// Embedding parameters, fixed for the shipped surrogate.
#[derive(Debug, Clone, Copy)]
struct EmbedParams {
    rate_lo: f64,
    rate_hi: f64,
    amplitude: f64,
    jump: f64,
    width: f64,
    floor: f64,
    milestones: [f64; 3],
}

impl Default for EmbedParams {
    fn default() -> Self {
        EmbedParams {
            rate_lo: EMBED_RATE_LO,
            rate_hi: EMBED_RATE_HI,
            amplitude: EMBED_AMPLITUDE,
            jump: EMBED_JUMP,
            width: EMBED_WIDTH,
            floor: EMBED_FLOOR,
            milestones: EMBED_MILESTONES,
        }
    }
}

impl EmbedParams {
    /// Milestone rows for a given schedule length, ascending and deduped.
    fn milestone_rows(&self, total_steps: usize) -> Vec<usize> {
        let mut rows: Vec<usize> = self
            .milestones
            .iter()
            .map(|f| ((f * total_steps as f64).round() as usize).clamp(1, total_steps))
            .collect();
        rows.sort_unstable();
        rows.dedup();
        rows
    }
}

/// How a trajectory is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecutionMode {
    /// Full model evaluation at every timestep.
    Full,
    /// Serve the most recent computed output unchanged at reuse steps.
    Reuse,
    /// Extrapolate linearly from the last two compute points. With fewer
    /// than two compute points in history this degrades to reuse.
    PredictOrder1,
}

/// Noise-level schedule family. Only the linear ramp is supported: sigma
/// runs from 1.0 at step `T` down to 0.0 at step 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScheduleKind {
    #[default]
    LinearSigma,
}

/// Seedable parameterization of the synthetic denoiser.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateConfig {
    /// Feature vector length. Must be at least 2: cosine distance on
    /// 1-dimensional positive features is degenerate and always 0.
    pub dimension: usize,
    /// Number of denoising steps `T`. Steps are numbered `T` (first,
    /// noisiest) down to 1 (last); the state after step 1 is `x_0`.
    pub total_steps: usize,
    /// Seed for the fixed random maps `M1`, `M2`.
    pub seed: u64,
    /// Strength of the state coupling inside the tanh. Zero yields the
    /// analytic family whose outputs depend only on the timestep.
    pub nonlinearity_scale: f64,
    pub schedule_kind: ScheduleKind,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            dimension: 64,
            total_steps: 50,
            seed: 0,
            nonlinearity_scale: 1.0,
            schedule_kind: ScheduleKind::LinearSigma,
        }
    }
}

impl SurrogateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dimension < 2 {
            return Err(CemError::Config {
                field: "dimension",
                reason: format!("must be >= 2, got {}", self.dimension),
            });
        }
        if self.total_steps < 2 {
            return Err(CemError::Config {
                field: "total_steps",
                reason: format!("must be >= 2, got {}", self.total_steps),
            });
        }
        if !self.nonlinearity_scale.is_finite() || self.nonlinearity_scale < 0.0 {
            return Err(CemError::Config {
                field: "nonlinearity_scale",
                reason: format!("must be finite and >= 0, got {}", self.nonlinearity_scale),
            });
        }
        Ok(())
    }
}

/// Per-timestep record of a full or cache-accelerated run.
///
/// States are indexed from the initial `x_T` down to the terminal `x_0`
/// (length `T + 1`); outputs and the computed mask cover steps `T..=1`
/// (length `T`). All vectors are finite and `dimension` long.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dimension: usize,
    total_steps: usize,
    states: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
    computed_mask: Vec<bool>,
}

impl Trajectory {
    /// Assemble a trajectory from raw parts, validating the shape
    /// invariants. Exporters feeding real model traces in through this
    /// constructor get the same checks as surrogate runs.
    pub fn from_parts(
        dimension: usize,
        total_steps: usize,
        states: Vec<Vec<f64>>,
        outputs: Vec<Vec<f64>>,
        computed_mask: Vec<bool>,
    ) -> Result<Self> {
        if dimension < 2 {
            return Err(CemError::Contract(format!(
                "trajectory dimension must be >= 2, got {dimension}"
            )));
        }
        if states.len() != total_steps + 1 {
            return Err(CemError::Contract(format!(
                "expected {} states, got {}",
                total_steps + 1,
                states.len()
            )));
        }
        if outputs.len() != total_steps || computed_mask.len() != total_steps {
            return Err(CemError::Contract(format!(
                "expected {} outputs and mask entries, got {} and {}",
                total_steps,
                outputs.len(),
                computed_mask.len()
            )));
        }
        for v in states.iter().chain(outputs.iter()) {
            if v.len() != dimension {
                return Err(CemError::Contract(format!(
                    "vector length {} does not match dimension {dimension}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(CemError::Contract(
                    "trajectory contains non-finite values".into(),
                ));
            }
        }
        Ok(Trajectory {
            dimension,
            total_steps,
            states,
            outputs,
            computed_mask,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    /// Output used at timestep `t` (`1..=T`). For cached runs this is the
    /// substituted vector at reuse steps.
    pub fn output_at(&self, t: usize) -> &[f64] {
        assert!((1..=self.total_steps).contains(&t), "timestep out of range");
        &self.outputs[self.total_steps - t]
    }

    /// State entering timestep `t`; `state_entering(T)` is the initial state.
    pub fn state_entering(&self, t: usize) -> &[f64] {
        assert!((1..=self.total_steps).contains(&t), "timestep out of range");
        &self.states[self.total_steps - t]
    }

    /// Terminal state `x_0`, after the last step.
    pub fn terminal_state(&self) -> &[f64] {
        &self.states[self.total_steps]
    }

    pub fn computed_at(&self, t: usize) -> bool {
        assert!((1..=self.total_steps).contains(&t), "timestep out of range");
        self.computed_mask[self.total_steps - t]
    }

    pub fn computed_mask(&self) -> &[bool] {
        &self.computed_mask
    }

    pub fn fully_computed(&self) -> bool {
        self.computed_mask.iter().all(|&c| c)
    }

    pub fn computed_count(&self) -> usize {
        self.computed_mask.iter().filter(|&&c| c).count()
    }
}

/// A denoising process the runners can drive: an output function over
/// (state, timestep), an initial-state draw, and a fixed update increment.
///
/// The state update applied by both runners is
/// `x_{t-1} = x_t - sigma_increment · D(x_t, t)`.
pub trait Denoiser {
    fn dimension(&self) -> usize;
    fn total_steps(&self) -> usize;
    /// Model output `D(x, t)` for `t` in `1..=total_steps`.
    fn output(&self, state: &[f64], timestep: usize) -> Vec<f64>;
    fn initial_state(&self, init_seed: u64) -> Vec<f64>;
    /// Per-step noise-level decrement `sigma_t - sigma_{t-1}`.
    fn sigma_increment(&self) -> f64;
}

/// The synthetic denoiser. Immutable after construction and safe to share
/// across threads; runs are independent.
#[derive(Debug, Clone)]
pub struct Surrogate {
    config: SurrogateConfig,
    m1: Vec<f64>,
    m2: Vec<f64>,
    sigma_step: f64,
    embed: EmbedParams,
    milestone_rows: Vec<usize>,
}

/// Build a surrogate from a validated config. `M1` and `M2` are drawn once
/// from the seed, entry-wise standard normal scaled by `1/sqrt(dimension)`
/// so outputs stay O(1) over long runs.
pub fn make_surrogate(config: SurrogateConfig) -> Result<Surrogate> {
    let embed = EmbedParams::default();
    config.validate()?;
    let dim = config.dimension;
    let mut rng = DetRng::with_stream(config.seed, MATRIX_STREAM);
    let scale = 1.0 / (dim as f64).sqrt();
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.next_normal() * scale).collect() };
    let m1 = draw(dim * dim);
    let m2 = draw(dim * dim);
    let sigma_step = 1.0 / (config.total_steps - 1) as f64;
    let milestone_rows = embed.milestone_rows(config.total_steps);
    Ok(Surrogate {
        config,
        m1,
        m2,
        sigma_step,
        embed,
        milestone_rows,
    })
}

impl Surrogate {
    pub fn config(&self) -> &SurrogateConfig {
        &self.config
    }

    /// Noise level at step `t`: 1.0 at `t = T` falling linearly to 0.0 at
    /// `t = 1`.
    pub fn sigma(&self, t: usize) -> f64 {
        (t - 1) as f64 / (self.config.total_steps - 1) as f64
    }

    /// Sinusoidal timestep embedding `c(t)`: a sin/cos bank under a
    /// milestone-peaked amplitude envelope, with a phase jump at every
    /// milestone at or above `t` (see the bank constants at the top of the
    /// module).
    fn timestep_embedding(&self, t: usize) -> Vec<f64> {
        let dim = self.config.dimension;
        let tf = t as f64;
        let half = (dim / 2).max(1);
        let e = &self.embed;
        let level = self.milestone_rows.iter().filter(|&&m| t <= m).count() as f64;
        let envelope = e.floor
            + (1.0 - e.floor)
                * self
                    .milestone_rows
                    .iter()
                    .map(|&m| {
                        let z = (tf - m as f64) / e.width;
                        (-0.5 * z * z).exp()
                    })
                    .fold(0.0f64, f64::max);
        (0..dim)
            .map(|k| {
                let frac = if half > 1 {
                    (k / 2) as f64 / (half - 1) as f64
                } else {
                    0.0
                };
                let rate = e.rate_lo + (e.rate_hi - e.rate_lo) * frac;
                let phase = rate * tf + e.jump * level * (1.0 + frac);
                e.amplitude * envelope * if k % 2 == 0 { phase.sin() } else { phase.cos() }
            })
            .collect()
    }
}

impl Denoiser for Surrogate {
    fn dimension(&self) -> usize {
        self.config.dimension
    }

    fn total_steps(&self) -> usize {
        self.config.total_steps
    }

    fn output(&self, state: &[f64], timestep: usize) -> Vec<f64> {
        let dim = self.config.dimension;
        debug_assert_eq!(state.len(), dim);
        let embed = self.timestep_embedding(timestep);
        let coupling = self.config.nonlinearity_scale;
        // hidden = tanh(scale · M1·x + c(t))
        let mut hidden = vec![0.0; dim];
        for (i, h) in hidden.iter_mut().enumerate() {
            let row = &self.m1[i * dim..(i + 1) * dim];
            let mut acc = 0.0;
            for (a, x) in row.iter().zip(state) {
                acc += a * x;
            }
            *h = (coupling * acc + embed[i]).tanh();
        }
        let mut out = vec![0.0; dim];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.m2[i * dim..(i + 1) * dim];
            let mut acc = 0.0;
            for (a, h) in row.iter().zip(&hidden) {
                acc += a * h;
            }
            *o = acc;
        }
        out
    }

    fn initial_state(&self, init_seed: u64) -> Vec<f64> {
        let mut rng = DetRng::with_stream(init_seed, INIT_STREAM);
        (0..self.config.dimension)
            .map(|_| rng.next_normal())
            .collect()
    }

    fn sigma_increment(&self) -> f64 {
        self.sigma_step
    }
}

fn check_finite(v: &[f64], timestep: usize) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        Err(CemError::Divergence { timestep })
    } else {
        Ok(())
    }
}

/// Run the denoiser with a full model evaluation at every step.
pub fn run_full<D: Denoiser>(den: &D, init_seed: u64) -> Result<Trajectory> {
    let total = den.total_steps();
    let dim = den.dimension();
    let sigma_step = den.sigma_increment();

    let mut x = den.initial_state(init_seed);
    check_finite(&x, total)?;
    let mut states = Vec::with_capacity(total + 1);
    let mut outputs = Vec::with_capacity(total);
    states.push(x.clone());
    for t in (1..=total).rev() {
        let d = den.output(&x, t);
        check_finite(&d, t)?;
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi -= sigma_step * di;
        }
        check_finite(&x, t)?;
        outputs.push(d);
        states.push(x.clone());
    }
    Trajectory::from_parts(dim, total, states, outputs, vec![true; total])
}

fn extrapolate(last: &(usize, Vec<f64>), prev: &(usize, Vec<f64>), t: usize) -> Vec<f64> {
    let (t_last, f_last) = last;
    let (t_prev, f_prev) = prev;
    // slope per timestep of descent, normalized by the compute-point gap so
    // affine output sequences are reproduced exactly for any schedule
    let gap = (t_prev - t_last) as f64;
    let dist = (t_last - t) as f64;
    f_last
        .iter()
        .zip(f_prev)
        .map(|(l, p)| l + (l - p) * dist / gap)
        .collect()
}

/// Run the denoiser under a cache schedule. Full evaluation happens exactly
/// at the schedule's compute steps; every other step substitutes an output
/// according to `mode`. `ExecutionMode::Full` ignores the reuse pattern and
/// computes everywhere.
pub fn run_cached<D: Denoiser>(
    den: &D,
    init_seed: u64,
    schedule: &CacheSchedule,
    mode: ExecutionMode,
) -> Result<Trajectory> {
    let total = den.total_steps();
    if schedule.total_steps() != total {
        return Err(CemError::Contract(format!(
            "schedule covers {} steps but the denoiser has {}",
            schedule.total_steps(),
            total
        )));
    }
    let dim = den.dimension();
    let sigma_step = den.sigma_increment();

    let mut is_compute = vec![false; total + 1];
    match mode {
        ExecutionMode::Full => is_compute.iter_mut().for_each(|c| *c = true),
        _ => {
            for &s in schedule.compute_steps() {
                is_compute[s] = true;
            }
        }
    }

    let mut x = den.initial_state(init_seed);
    check_finite(&x, total)?;
    let mut states = Vec::with_capacity(total + 1);
    let mut outputs = Vec::with_capacity(total);
    let mut mask = Vec::with_capacity(total);
    states.push(x.clone());

    // last two compute points, newest first
    let mut last: Option<(usize, Vec<f64>)> = None;
    let mut prev: Option<(usize, Vec<f64>)> = None;

    for t in (1..=total).rev() {
        let d = if is_compute[t] {
            let d = den.output(&x, t);
            prev = last.take();
            last = Some((t, d.clone()));
            d
        } else {
            let last_ref = last
                .as_ref()
                .expect("schedule starts at step T, so a compute point precedes every reuse");
            match (mode, prev.as_ref()) {
                (ExecutionMode::PredictOrder1, Some(prev_ref)) => {
                    extrapolate(last_ref, prev_ref, t)
                }
                // reuse, or predict without enough history
                _ => last_ref.1.clone(),
            }
        };
        check_finite(&d, t)?;
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi -= sigma_step * di;
        }
        check_finite(&x, t)?;
        outputs.push(d);
        mask.push(is_compute[t]);
        states.push(x.clone());
    }
    Trajectory::from_parts(dim, total, states, outputs, mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheduler::uniform_schedule;

    fn default_surrogate() -> Surrogate {
        make_surrogate(SurrogateConfig::default()).unwrap()
    }

    fn zero_scale_config() -> SurrogateConfig {
        SurrogateConfig {
            dimension: 16,
            total_steps: 13,
            seed: 5,
            nonlinearity_scale: 0.0,
            ..SurrogateConfig::default()
        }
    }

    #[test]
    fn same_seed_same_outputs() {
        let a = default_surrogate();
        let b = default_surrogate();
        let x = a.initial_state(3);
        assert_eq!(a.output(&x, 50), b.output(&x, 50));
    }

    #[test]
    fn distinct_seeds_differ() {
        let a = make_surrogate(SurrogateConfig {
            seed: 1,
            ..SurrogateConfig::default()
        })
        .unwrap();
        let b = make_surrogate(SurrogateConfig {
            seed: 2,
            ..SurrogateConfig::default()
        })
        .unwrap();
        let x = a.initial_state(3);
        assert_ne!(a.output(&x, 50), b.output(&x, 50));
    }

    #[test]
    fn dimension_one_rejected() {
        let err = make_surrogate(SurrogateConfig {
            dimension: 1,
            ..SurrogateConfig::default()
        })
        .unwrap_err();
        assert!(matches!(
            err,
            CemError::Config {
                field: "dimension",
                ..
            }
        ));
    }

    #[test]
    fn full_run_bookkeeping() {
        let s = default_surrogate();
        let traj = run_full(&s, 0).unwrap();
        assert_eq!(traj.total_steps(), 50);
        assert_eq!(traj.output_at(50).len(), 64);
        assert_eq!(traj.terminal_state().len(), 64);
        assert!(traj.fully_computed());
        assert_eq!(traj.computed_count(), 50);
        // 50 outputs and 51 states
        assert_eq!(traj.computed_mask().len(), 50);
    }

    #[test]
    fn full_run_deterministic() {
        let s = default_surrogate();
        assert_eq!(run_full(&s, 7).unwrap(), run_full(&s, 7).unwrap());
    }

    #[test]
    fn sigma_endpoints() {
        let s = default_surrogate();
        assert_eq!(s.sigma(50), 1.0);
        assert_eq!(s.sigma(1), 0.0);
    }

    #[test]
    fn zero_scale_outputs_ignore_state() {
        let s = make_surrogate(zero_scale_config()).unwrap();
        let a = run_full(&s, 1).unwrap();
        let b = run_full(&s, 2).unwrap();
        let total = s.total_steps();
        for t in 1..=total {
            assert_eq!(a.output_at(t), b.output_at(t));
            // closed form: M2 · tanh(c(t)), evaluated through the public map
            // with an arbitrary state since the coupling is zero
            let g = s.output(&vec![3.25; s.dimension()], t);
            assert_eq!(a.output_at(t), &g[..]);
        }
        // states follow the same closed-form path: increments agree up to
        // the rounding induced by the different initial offsets
        for t in 1..=total {
            let da = a
                .state_entering(t)
                .iter()
                .zip(a.state_entering(total))
                .map(|(x, x0)| x - x0);
            let db = b
                .state_entering(t)
                .iter()
                .zip(b.state_entering(total))
                .map(|(x, x0)| x - x0);
            for (x, y) in da.zip(db) {
                assert!((x - y).abs() < 1e-12, "t={t}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn compute_every_step_matches_full_run() {
        let s = default_surrogate();
        let schedule = uniform_schedule(50, 1).unwrap();
        let cached = run_cached(&s, 3, &schedule, ExecutionMode::Reuse).unwrap();
        let full = run_full(&s, 3).unwrap();
        assert_eq!(cached, full);
    }

    #[test]
    fn reuse_mask_counts_computes() {
        let s = default_surrogate();
        // T=50, 25 hops of 2 except a final hop of 1 would change the count;
        // use the exact all-twos budget via 24 hops of 2 plus one of 1
        let schedule = uniform_schedule(50, 2).unwrap();
        assert_eq!(schedule.num_caching(), 25);
        let cached = run_cached(&s, 3, &schedule, ExecutionMode::Reuse).unwrap();
        assert_eq!(cached.computed_count(), 26);
        for &t in schedule.compute_steps() {
            assert!(cached.computed_at(t));
        }
    }

    #[test]
    fn schedule_step_mismatch_rejected() {
        let s = default_surrogate();
        let schedule = uniform_schedule(40, 2).unwrap();
        let err = run_cached(&s, 0, &schedule, ExecutionMode::Reuse).unwrap_err();
        assert!(matches!(err, CemError::Contract(_)));
    }

    #[test]
    fn zero_scale_reuse_drift_matches_closed_form() {
        let s = make_surrogate(zero_scale_config()).unwrap();
        let total = s.total_steps();
        let schedule = uniform_schedule(total, 2).unwrap();
        let cached = run_cached(&s, 9, &schedule, ExecutionMode::Reuse).unwrap();
        let full = run_full(&s, 9).unwrap();
        // outputs are state-independent, so the terminal gap is exactly the
        // sigma-increment-weighted sum of output substitutions
        let probe = vec![0.0; s.dimension()];
        let mut expected = vec![0.0; s.dimension()];
        for t in (1..=total).rev() {
            if !cached.computed_at(t) {
                // nearest compute point above t
                let src = *schedule
                    .compute_steps()
                    .iter()
                    .filter(|&&c| c > t)
                    .min()
                    .unwrap();
                let g_src = s.output(&probe, src);
                let g_t = s.output(&probe, t);
                for (e, (a, b)) in expected.iter_mut().zip(g_src.iter().zip(&g_t)) {
                    *e += s.sigma_increment() * (a - b);
                }
            }
        }
        for (i, e) in expected.iter().enumerate() {
            let actual = full.terminal_state()[i] - cached.terminal_state()[i];
            assert!((actual - e).abs() < 1e-12, "component {i}: {actual} vs {e}");
        }
    }

    #[test]
    fn predict_degrades_to_reuse_before_two_computes() {
        let s = default_surrogate();
        let schedule = uniform_schedule(50, 49).unwrap(); // computes at 50 and 1 only
        let predicted = run_cached(&s, 4, &schedule, ExecutionMode::PredictOrder1).unwrap();
        let reused = run_cached(&s, 4, &schedule, ExecutionMode::Reuse).unwrap();
        // only one compute point exists before step 1, so every reuse step
        // falls back to plain reuse
        assert_eq!(predicted, reused);
    }

    #[test]
    fn interpolation_consistency_on_analytic_family() {
        // nested compute sets: uniform intervals 8, 4, 2, 1 on T = 49
        // (T - 1 = 48 divisible by each), distances non-increasing
        let s = make_surrogate(SurrogateConfig {
            dimension: 16,
            total_steps: 49,
            seed: 2,
            nonlinearity_scale: 0.0,
            ..SurrogateConfig::default()
        })
        .unwrap();
        let full = run_full(&s, 11).unwrap();
        let mut prev_dist = f64::INFINITY;
        for n in [8usize, 4, 2, 1] {
            let schedule = uniform_schedule(49, n).unwrap();
            let cached = run_cached(&s, 11, &schedule, ExecutionMode::Reuse).unwrap();
            let dist: f64 = cached
                .terminal_state()
                .iter()
                .zip(full.terminal_state())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(
                dist <= prev_dist + 1e-12,
                "interval {n}: {dist} > {prev_dist}"
            );
            prev_dist = dist;
        }
        assert_eq!(prev_dist, 0.0); // interval 1 computes every step
    }
}
