//! Offline caching-error modeling and budget-constrained cache-schedule
//! planning for iterative denoisers.
//!
//! The pipeline has four stages:
//!
//! 1. [`surrogate`] — a cheap, seedable synthetic denoiser with full and
//!    cache-accelerated execution, so the whole pipeline can be exercised
//!    without a real generation model.
//! 2. [`error_model`] — the offline prior: per-(timestep, interval) cosine
//!    caching errors aggregated over many trajectories, with variance
//!    statistics, a consistency-band check and a sample-count bound.
//! 3. [`scheduler`] — cumulative error approximation, the budget-constrained
//!    dynamic program over timesteps and cache intervals, a brute-force
//!    planning oracle, and fixed/linear baseline schedules.
//! 4. [`evaluate`] — fidelity of cached runs against full runs, measured
//!    accumulated error, and random-schedule sweeps correlating planned cost
//!    with realized fidelity.
//!
//! [`store`] pins the on-disk interchange formats (error-matrix text files,
//! schedule JSON, report CSV) so priors exported by other tools plug in at
//! the file boundary.

pub mod error;
pub mod error_model;
pub mod evaluate;
pub mod rng;
pub mod scheduler;
pub mod store;
pub mod surrogate;

pub use error::{CemError, Result};
pub use error_model::{CellStats, ConsistencyReport, ErrorMatrix, IntervalSummary};
pub use evaluate::{FidelityReport, SweepOutcome, SweepRecord};
pub use scheduler::{CacheSchedule, CumulativeErrorMatrix, DpTable};
pub use surrogate::{Denoiser, ExecutionMode, Surrogate, SurrogateConfig, Trajectory};
