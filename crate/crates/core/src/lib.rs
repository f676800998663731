//! Exact and stochastic analysis of the balls-in-bins removal process.
//!
//! Balls are distributed into bins; repeatedly a bin is selected (uniformly
//! or by a fixed weight vector) and, if non-empty, loses one ball; the
//! process stops when a single non-empty bin remains. This crate computes
//! the expected number of remaining balls exactly for arbitrary allocations
//! and weights, enumerates the stopping-time event partition behind the
//! balanced-is-optimal argument, simulates the process reproducibly at
//! scale, and searches allocation space for exact minimizers.
//!
//! Entry points:
//!
//! * [`solver::expected_remaining`] — exact expectation via memoized
//!   recursion over allocation states.
//! * [`events::event_distribution`] — exhaustive coupled-trace enumeration
//!   of the event partition, with per-lemma verification helpers.
//! * [`sim::simulate`] — seeded, schedule-independent Monte Carlo.
//! * [`optimizer::optimal_allocations`] — exact argmin over compositions,
//!   plus the balanced-minimizer sweep and the weighted distance scan.
//! * [`cli::run`] — the `lastbin` command-line interface.

pub mod cli;
pub mod error;
pub mod events;
pub mod model;
pub mod optimizer;
pub mod rational;
pub mod sim;
pub mod solver;

pub use error::{Error, Result};
pub use model::{
    balanced_allocations, is_terminal, proportional_allocation, Allocation, ProcessState,
    RemovalTrace, StepMode, WeightVector,
};
pub use rational::ExactRational;
