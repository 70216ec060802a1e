//! Crate-wide error type.

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CemError>;

#[derive(Debug, thiserror::Error)]
pub enum CemError {
    /// A configuration field violates its invariant.
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: &'static str, reason: String },

    /// An operation was called with arguments that break its contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Input on which the requested quantity is mathematically undefined.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A correlation statistic is undefined (constant sequence).
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    /// A trajectory run produced a non-finite value.
    #[error("numerical divergence at timestep {timestep}")]
    Divergence { timestep: usize },

    /// No valid schedule exists for the requested budget.
    #[error(
        "infeasible budget: total_steps={total_steps} num_caching={num_caching} \
         candidates={candidates:?}: {detail}"
    )]
    Infeasible {
        total_steps: usize,
        num_caching: usize,
        candidates: Vec<usize>,
        detail: String,
    },

    /// Exhaustive enumeration would exceed the instance-size guard.
    #[error("instance too large: more than {guard} compositions to enumerate")]
    InstanceTooLarge { guard: u64 },

    /// An interval is not present in the candidate set of a matrix.
    #[error("unknown interval: {0}")]
    Lookup(String),

    /// A persisted file is malformed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A persisted file is internally inconsistent.
    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
