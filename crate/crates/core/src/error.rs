//! Error type shared by every module.
//!
//! Message prefixes are stable: callers (including the CLI) match on them to
//! pick exit codes and diagnostics, so changing a prefix is a breaking change.

use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// A string could not be parsed as an exact fraction.
    #[error("invalid fraction: {0}")]
    InvalidFraction(String),

    /// An allocation failed its structural invariants.
    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),

    /// A weight vector failed its structural invariants.
    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    /// Paired inputs (allocation vs weights, etc.) disagree on length.
    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    /// A bin index is out of range or otherwise not usable.
    #[error("invalid index: {0}")]
    InvalidIndex(String),

    /// An operation-specific precondition does not hold.
    #[error("precondition violation: {0}")]
    Precondition(String),

    /// A configured resource budget (memo states or enumeration nodes) would
    /// be exceeded. Never downgraded to a silent truncation.
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    /// A replayed trace ended before the process it describes terminated.
    #[error("trace too short: {0}")]
    TraceTooShort(String),
}

pub type Result<T> = std::result::Result<T, Error>;
