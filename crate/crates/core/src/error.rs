//! Crate-wide error type.

use thiserror::Error;

use crate::solver::Solution;

/// Errors produced by model evaluation, the optimizers, the detector
/// simulation, and configuration loading.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of an operation
    /// (negative duration, probability outside `[0, 0.5]`, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A time allocation violates the block structure (negative component
    /// or components that do not sum to one block).
    #[error("infeasible allocation: {0}")]
    Infeasible(String),

    /// Parameters or gains failed validation; the message lists every
    /// violated constraint.
    #[error("invalid input: {0}")]
    Validation(String),

    /// The bisection ran out of iterations before reaching its tolerance.
    /// The best feasible solution found so far is attached.
    #[error("solver did not converge within {iterations} iterations (best common throughput {best_value})")]
    NonConvergence {
        iterations: usize,
        best_value: f64,
        best: Box<Solution>,
    },

    /// A configuration file could not be parsed or resolved.
    #[error("config error: {0}")]
    Config(String),

    /// File I/O failed while reading configuration or writing reports.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
