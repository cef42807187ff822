//! Fixed-point solver and certification suite for the zero-dimensional
//! `phi^4` equations of motion of connected amputated Green's functions.
//!
//! The crate builds the splitting envelopes and the fundamental sequence,
//! iterates the contractive map `M*` to its fixed point under a weighted
//! sup-norm, and checks the sign, bound and contraction properties of the
//! result.

pub mod banach;
pub mod cli;
pub mod combinatorics;
pub mod dynamics;
pub mod envelopes;
pub mod error;
pub mod ext;
pub mod solver;
pub mod verify;

#[cfg(test)]
mod invariants;

pub use envelopes::{Coupling, EnvelopeSet, GreenSequence, SplittingSequence};
pub use error::{Error, Result};
pub use ext::ExtScalar;
pub use solver::{solve, ClosurePolicy, IterationReport, SolveOptions, StartPolicy};
