//! Shared error type for the whole crate.

use thiserror::Error;

/// Everything that can go wrong across the toolkit.
///
/// A single enum keeps signatures light; variants carry enough context to
/// tell a caller whether the failure is their input (dimensions, ranges),
/// the sampling budget, or an internal inconsistency worth a bug report.
#[derive(Debug, Error)]
pub enum Error {
    /// Vector lengths disagree with the instance's action/outcome counts.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An action or outcome index is out of range.
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    /// The instance fails validation; each entry is one human-readable violation.
    #[error("invalid instance: {}", .0.join("; "))]
    InvalidInstance(Vec<String>),

    /// A scalar argument is outside its documented range.
    #[error("parameter out of range: {0}")]
    ParamRange(String),

    /// The sampling round budget was exhausted before the algorithm finished.
    #[error("round budget exhausted after {rounds} rounds (cap {cap})")]
    BudgetExceeded { rounds: u64, cap: u64 },

    /// The derived per-estimate sample count does not fit in a u64.
    #[error("derived sample count is astronomically large (q ~ {0:.3e}); override q for desk-scale runs")]
    BudgetAstronomical(f64),

    /// Rejection sampling gave up before meeting the separation constraint.
    #[error("rejection sampling budget exhausted: {0}")]
    RejectionBudget(String),

    /// An operation needing the environment trace ran on an untraced environment.
    #[error("environment trace is disabled; construct the environment with tracing enabled")]
    TraceDisabled,

    /// A grid evaluation would exceed the evaluation budget.
    #[error("grid too fine: {0} evaluations exceeds budget {1}")]
    GridBudget(u128, u128),

    /// Geometry reached a state the algorithm's invariants rule out.
    #[error("internal geometry inconsistency: {0}")]
    Geometry(String),

    /// A linear program that must be solvable was infeasible or unbounded.
    #[error("linear program failed: {0}")]
    Lp(String),

    /// Reading or writing a file failed.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failed.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
