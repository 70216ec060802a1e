//! Instance builders shared by the benchmarks.

use cem_core::rng::DetRng;
use cem_core::scheduler::CumulativeErrorMatrix;
use cem_core::surrogate::{make_surrogate, Surrogate, SurrogateConfig};

/// Cumulative matrix with uniform random costs on every structural cell.
pub fn random_cumulative(
    total_steps: usize,
    intervals: &[usize],
    seed: u64,
) -> CumulativeErrorMatrix {
    let k = intervals.len();
    let mut rng = DetRng::new(seed);
    let mut cells = vec![None; total_steps * k];
    for t in 1..=total_steps {
        for (ki, &n) in intervals.iter().enumerate() {
            if t + n <= total_steps {
                cells[(t - 1) * k + ki] = Some(rng.next_f64());
            }
        }
    }
    CumulativeErrorMatrix::from_cells(total_steps, intervals.to_vec(), vec![1.0; k], cells, 1)
        .expect("valid synthetic matrix")
}

/// The default surrogate used by the pipeline benchmarks.
pub fn default_surrogate() -> Surrogate {
    make_surrogate(SurrogateConfig::default()).expect("default config is valid")
}
