//! Core domain model: allocations, selection weights, and the removal-process
//! state machine.
//!
//! The process: balls sit in `k` bins; each round a bin is selected according
//! to a weight distribution and, if non-empty, loses one ball. It stops when a
//! single non-empty bin remains. Two bookkeeping modes exist for the per-bin
//! residual counts:
//!
//! * `Plain` — selections of empty bins are no-ops; residuals never go below
//!   zero. This is the process whose remaining-ball count we study.
//! * `Signed` — every selection decrements, so a bin selected more often than
//!   its initial count carries a negative residual. Coupled-trace analysis
//!   (see the event module) relies on this convention.
//!
//! All types here are immutable values after construction and all operations
//! are pure functions, so everything can be shared freely across threads.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed};

use crate::error::{Error, Result};
use crate::rational::{self, ExactRational};

/// Per-bin ball counts. Always at least two bins, all counts non-negative.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Allocation {
    counts: Vec<u64>,
}

impl Allocation {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::InvalidAllocation(format!(
                "need at least 2 bins, got {}",
                counts.len()
            )));
        }
        Ok(Self { counts })
    }

    /// Parses a comma-separated list of non-negative integers, e.g. `"5,1"`.
    pub fn parse(s: &str) -> Result<Self> {
        let counts = s
            .split(',')
            .map(|part| {
                part.trim().parse::<u64>().map_err(|_| {
                    Error::InvalidAllocation(format!("cannot parse {part:?} as a ball count"))
                })
            })
            .collect::<Result<Vec<u64>>>()?;
        Self::new(counts)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn count(&self, bin: usize) -> u64 {
        self.counts[bin]
    }

    pub fn non_empty_bins(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// Whether `bin` holds a (weakly) maximal count.
    pub fn is_max_bin(&self, bin: usize) -> bool {
        let max = self.counts.iter().copied().max().unwrap_or(0);
        self.counts[bin] == max
    }

    /// The allocation after moving one ball from `from` to `to`.
    pub fn transfer(&self, from: usize, to: usize) -> Result<Self> {
        if from >= self.bins() || to >= self.bins() {
            return Err(Error::InvalidIndex(format!(
                "bin index out of range for k={}",
                self.bins()
            )));
        }
        if self.counts[from] == 0 {
            return Err(Error::Precondition(format!(
                "cannot move a ball out of empty bin {from}"
            )));
        }
        let mut counts = self.counts.clone();
        counts[from] -= 1;
        counts[to] += 1;
        Self::new(counts)
    }

    pub fn initial_state(&self) -> ProcessState {
        ProcessState {
            residuals: self.counts.iter().map(|&c| c as i64).collect(),
            selection_counts: vec![0; self.counts.len()],
            round: 0,
        }
    }
}

impl fmt::Display for Allocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.counts.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Per-bin selection probabilities: positive exact rationals summing to one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightVector {
    weights: Vec<ExactRational>,
}

impl WeightVector {
    pub fn new(weights: Vec<ExactRational>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::InvalidWeights(format!(
                "need at least 2 weights, got {}",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_positive()) {
            return Err(Error::InvalidWeights(
                "every weight must be strictly positive".into(),
            ));
        }
        let sum: ExactRational = weights.iter().sum();
        if !sum.is_one() {
            return Err(Error::InvalidWeights(format!(
                "weights must sum to 1 exactly, got {sum}"
            )));
        }
        Ok(Self { weights })
    }

    /// The uniform distribution on `k` bins.
    pub fn uniform(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidWeights(format!(
                "need at least 2 weights, got {k}"
            )));
        }
        let w = ExactRational::new(BigInt::one(), BigInt::from(k));
        Ok(Self {
            weights: vec![w; k],
        })
    }

    /// Parses a comma-separated list of fractions, e.g. `"5/6,1/6"`.
    pub fn parse(s: &str) -> Result<Self> {
        let weights = s
            .split(',')
            .map(rational::parse_rational)
            .collect::<Result<Vec<_>>>()?;
        Self::new(weights)
    }

    pub fn weights(&self) -> &[ExactRational] {
        &self.weights
    }

    pub fn bins(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, bin: usize) -> &ExactRational {
        &self.weights[bin]
    }

    pub fn is_uniform(&self) -> bool {
        self.weights.iter().all(|w| w == &self.weights[0])
    }

    /// Checks that the vector pairs with an allocation of `k` bins.
    pub fn check_len(&self, k: usize) -> Result<()> {
        if self.bins() != k {
            return Err(Error::LengthMismatch(format!(
                "{} weights for {} bins",
                self.bins(),
                k
            )));
        }
        Ok(())
    }
}

impl fmt::Display for WeightVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.weights.iter().map(|w| w.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Residual bookkeeping mode for [`ProcessState::step`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepMode {
    /// Selections of empty bins are no-ops; residuals stay non-negative.
    Plain,
    /// Every selection decrements, so residuals may go negative.
    Signed,
}

/// A snapshot of the process: signed residuals, per-bin selection tallies and
/// the current round (`round == sum of selection counts`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProcessState {
    pub residuals: Vec<i64>,
    pub selection_counts: Vec<u64>,
    pub round: u64,
}

impl ProcessState {
    pub fn bins(&self) -> usize {
        self.residuals.len()
    }

    /// Applies one selection. Total on valid states; panics only on an
    /// out-of-range bin index, which is a caller bug.
    pub fn step(&self, bin: usize, mode: StepMode) -> ProcessState {
        assert!(bin < self.bins(), "bin index {bin} out of range");
        let mut next = self.clone();
        next.selection_counts[bin] += 1;
        next.round += 1;
        match mode {
            StepMode::Plain => {
                if next.residuals[bin] > 0 {
                    next.residuals[bin] -= 1;
                }
            }
            StepMode::Signed => {
                next.residuals[bin] -= 1;
            }
        }
        next
    }

    pub fn non_empty_bins(&self) -> usize {
        self.residuals.iter().filter(|&&r| r > 0).count()
    }

    /// Total balls still present (negative residuals count as empty).
    pub fn remaining(&self) -> u64 {
        self.residuals.iter().map(|&r| r.max(0) as u64).sum()
    }
}

/// Terminal iff at most one bin still holds balls. The first round at which
/// this holds is the stopping time of the process.
pub fn is_terminal(state: &ProcessState) -> bool {
    state.non_empty_bins() <= 1
}

/// Replays a selection sequence from `alloc` and returns the terminal state.
pub fn replay(alloc: &Allocation, selections: &[usize], mode: StepMode) -> ProcessState {
    let mut state = alloc.initial_state();
    for &bin in selections {
        state = state.step(bin, mode);
    }
    state
}

/// A finite selection sequence together with its exact probability under the
/// effective-selection convention (weights renormalized over the bins still
/// in play at each step).
#[derive(Clone, Debug, PartialEq)]
pub struct RemovalTrace {
    pub selections: Vec<usize>,
    pub probability: ExactRational,
}

impl RemovalTrace {
    pub fn new(selections: Vec<usize>, probability: ExactRational) -> Result<Self> {
        if !probability.is_positive() || probability > ExactRational::one() {
            return Err(Error::Precondition(format!(
                "trace probability must lie in (0, 1], got {probability}"
            )));
        }
        Ok(Self {
            selections,
            probability,
        })
    }
}

/// All allocations of `n` balls into `k` bins whose counts pairwise differ by
/// at most one: every arrangement of `n mod k` bins holding `ceil(n/k)` and
/// the rest holding `floor(n/k)`.
pub fn balanced_allocations(n: u64, k: usize) -> Result<BTreeSet<Allocation>> {
    if k < 2 {
        return Err(Error::InvalidAllocation(format!(
            "need at least 2 bins, got {k}"
        )));
    }
    let high = n.div_ceil(k as u64);
    let low = n / k as u64;
    let high_slots = (n % k as u64) as usize;
    let mut out = BTreeSet::new();
    // Choose which bins hold the larger count.
    let mut chosen = vec![false; k];
    fn go(
        chosen: &mut Vec<bool>,
        start: usize,
        remaining: usize,
        high: u64,
        low: u64,
        out: &mut BTreeSet<Allocation>,
    ) {
        if remaining == 0 {
            let counts = chosen.iter().map(|&h| if h { high } else { low }).collect();
            out.insert(Allocation { counts });
            return;
        }
        for idx in start..chosen.len() {
            if chosen.len() - idx < remaining {
                break;
            }
            chosen[idx] = true;
            go(chosen, idx + 1, remaining - 1, high, low, out);
            chosen[idx] = false;
        }
    }
    go(&mut chosen, 0, high_slots, high, low, &mut out);
    Ok(out)
}

/// Integer allocation approximating `n * weights` by the largest-remainder
/// rule: floors first, then the leftover balls go to the bins with the
/// largest fractional remainders, ties broken by lower bin index. When
/// `n * weights` is integral per coordinate this returns it exactly.
pub fn proportional_allocation(n: u64, weights: &WeightVector) -> Allocation {
    let n_rat = rational::from_u64(n);
    let mut counts: Vec<u64> = Vec::with_capacity(weights.bins());
    let mut remainders: Vec<(usize, ExactRational)> = Vec::with_capacity(weights.bins());
    let mut assigned: u64 = 0;
    for (idx, w) in weights.weights().iter().enumerate() {
        let exact = &n_rat * w;
        let floor = exact.floor();
        let floor_u64 = floor
            .to_integer()
            .try_into()
            .expect("floor of n*w fits in u64 for non-negative inputs");
        counts.push(floor_u64);
        assigned += floor_u64;
        remainders.push((idx, exact - floor));
    }
    let leftover = n - assigned;
    remainders.sort_by(|(ia, ra), (ib, rb)| rb.cmp(ra).then(ia.cmp(ib)));
    for (idx, _) in remainders.iter().take(leftover as usize) {
        counts[*idx] += 1;
    }
    Allocation { counts }
}
