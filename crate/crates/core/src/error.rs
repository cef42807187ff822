//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures raised by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Two objects that must share coupling or truncation do not.
    #[error("consistency error: {0}")]
    Consistency(String),
    /// A sequence fails a membership predicate at order `n`.
    #[error("membership violation at n={n}: {predicate}")]
    Membership {
        /// Odd order of the offending entry.
        n: usize,
        /// Name of the failed predicate.
        predicate: String,
    },
    /// A zero denominator was met while evaluating order `n`.
    #[error("degenerate input at n={n}")]
    Degenerate {
        /// Odd order of the offending entry.
        n: usize,
    },
    /// A value beyond the truncation order was requested under strict closure.
    #[error("truncation error: order n={n} needs a value beyond the truncation")]
    Truncation {
        /// Odd order whose evaluation required the missing value.
        n: usize,
    },
    /// The image of the contractive map left the admissible set during iteration.
    #[error("stability error at iteration {iteration}, n={n}: {predicate}")]
    Stability {
        /// Zero-based iteration index at which the violation appeared.
        iteration: usize,
        /// Odd order of the offending entry.
        n: usize,
        /// Name of the failed predicate.
        predicate: String,
    },
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
