//! Exact search over initial allocations.
//!
//! `optimal_allocations` enumerates every distribution of `n` balls into `k`
//! bins (reduced to non-increasing representatives when the weights are
//! uniform), evaluates each exactly, and returns the full argmin set. On top
//! of that sit the balanced-minimizer verification sweep and the weighted
//! scan comparing optimal against balanced and proportional allocations.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::{balanced_allocations, proportional_allocation, Allocation, WeightVector};
use crate::rational::ExactRational;
use crate::solver::{Solver, DEFAULT_STATE_BUDGET};

/// All compositions of `n` into exactly `k` ordered non-negative parts, in
/// lexicographic order from `(n, 0, ..., 0)` down to `(0, ..., 0, n)`.
pub fn compositions(n: u64, k: usize) -> CompositionIter {
    let mut first = vec![0u64; k];
    if k > 0 {
        first[0] = n;
    }
    CompositionIter { next: Some(first) }
}

pub struct CompositionIter {
    next: Option<Vec<u64>>,
}

impl Iterator for CompositionIter {
    type Item = Vec<u64>;

    fn next(&mut self) -> Option<Vec<u64>> {
        let current = self.next.take()?;
        let k = current.len();
        if k >= 2 {
            let tail = current[k - 1];
            // Rightmost position before the last with mass to shift.
            if let Some(i) = (0..k - 1).rev().find(|&i| current[i] > 0) {
                let mut next = current.clone();
                next[i] -= 1;
                next[i + 1] = tail + 1;
                for slot in next.iter_mut().skip(i + 2) {
                    *slot = 0;
                }
                self.next = Some(next);
            }
        }
        Some(current)
    }
}

/// Non-increasing representatives: partitions of `n` into at most `k` parts,
/// zero-padded to length `k`.
pub fn partitions(n: u64, k: usize) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn go(remaining: u64, max_part: u64, slots: usize, current: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if remaining == 0 {
            let mut padded = current.clone();
            padded.resize(current.capacity(), 0);
            out.push(padded);
            return;
        }
        if slots == 0 {
            return;
        }
        let upper = remaining.min(max_part);
        let lower = remaining.div_ceil(slots as u64);
        for part in (lower..=upper).rev() {
            current.push(part);
            go(remaining - part, part, slots - 1, current, out);
            current.pop();
        }
    }
    go(n, n.max(1), k, &mut current, &mut out);
    if n == 0 {
        return vec![vec![0; k]];
    }
    out
}

/// Streams the search space for `n` balls in `k` bins: non-increasing
/// representatives when `reduce_symmetry` is set, all compositions otherwise.
pub fn enumerate_compositions(
    n: u64,
    k: usize,
    reduce_symmetry: bool,
) -> Result<Box<dyn Iterator<Item = Allocation>>> {
    if k < 2 {
        return Err(Error::InvalidAllocation(format!(
            "need at least 2 bins, got {k}"
        )));
    }
    if reduce_symmetry {
        Ok(Box::new(
            partitions(n, k)
                .into_iter()
                .map(|c| Allocation::new(c).expect("k >= 2 checked above")),
        ))
    } else {
        Ok(Box::new(
            compositions(n, k).map(|c| Allocation::new(c).expect("k >= 2 checked above")),
        ))
    }
}

/// Exact argmin set over all allocations of `n` balls into `k` bins.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationResult {
    pub minimizers: BTreeSet<Allocation>,
    pub min_value: ExactRational,
    /// Distinct allocations evaluated during the search.
    pub evaluated: u64,
    pub used_symmetry: bool,
}

pub fn optimal_allocations(
    n: u64,
    k: usize,
    weights: &WeightVector,
) -> Result<OptimizationResult> {
    optimal_allocations_with_budget(n, k, weights, DEFAULT_STATE_BUDGET)
}

pub fn optimal_allocations_with_budget(
    n: u64,
    k: usize,
    weights: &WeightVector,
    budget: usize,
) -> Result<OptimizationResult> {
    weights.check_len(k)?;
    let use_symmetry = weights.is_uniform();
    let mut solver = Solver::with_budget(weights.clone(), budget);
    let mut best: Option<ExactRational> = None;
    let mut argmin: BTreeSet<Allocation> = BTreeSet::new();
    let mut evaluated = 0u64;
    for candidate in enumerate_compositions(n, k, use_symmetry)? {
        let value = solver.expected_remaining(&candidate)?;
        evaluated += 1;
        match &best {
            Some(current) if value > *current => {}
            Some(current) if value == *current => {
                argmin.insert(candidate);
            }
            _ => {
                best = Some(value);
                argmin = BTreeSet::from([candidate]);
            }
        }
    }
    let min_value = best.expect("at least one composition exists for every n >= 0");

    if use_symmetry {
        // Minimizers of a symmetric objective come in permutation orbits;
        // report the full orbit of each representative.
        let mut expanded = BTreeSet::new();
        for rep in argmin {
            expand_orbit(rep.counts(), &mut expanded);
        }
        argmin = expanded;
    }

    // Guard against memo corruption: recompute one minimizer from scratch.
    let witness = argmin.iter().next().expect("argmin set is never empty");
    let recheck = Solver::with_budget(weights.clone(), budget).expected_remaining(witness)?;
    if recheck != min_value {
        return Err(Error::Precondition(format!(
            "internal consistency failure: fresh evaluation of {witness} gave {recheck}, search gave {min_value}"
        )));
    }

    Ok(OptimizationResult {
        minimizers: argmin,
        min_value,
        evaluated,
        used_symmetry: use_symmetry,
    })
}

fn expand_orbit(counts: &[u64], out: &mut BTreeSet<Allocation>) {
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    // Lexicographic next-permutation walk over the multiset.
    loop {
        out.insert(Allocation::new(sorted.clone()).expect("orbit keeps length"));
        // Find the ascent from the right.
        let Some(i) = (0..sorted.len() - 1).rev().find(|&i| sorted[i] < sorted[i + 1]) else {
            break;
        };
        let j = (i + 1..sorted.len())
            .rev()
            .find(|&j| sorted[j] > sorted[i])
            .expect("ascent guarantees a successor");
        sorted.swap(i, j);
        sorted[i + 1..].reverse();
    }
}

/// One minimizer-vs-balanced-family comparison.
#[derive(Clone, Debug)]
pub struct Theorem1Instance {
    pub n: u64,
    pub k: usize,
    pub min_value: ExactRational,
    pub minimizers: BTreeSet<Allocation>,
    pub balanced: BTreeSet<Allocation>,
    pub matched: bool,
}

#[derive(Clone, Debug)]
pub struct Theorem1Report {
    pub instances: Vec<Theorem1Instance>,
    pub pass: bool,
}

/// Checks, for every `1 <= n <= n_max` and `2 <= k <= k_max` under uniform
/// weights, that the exact minimizer set equals the balanced family — both
/// inclusion directions.
pub fn verify_theorem1(n_max: u64, k_max: usize) -> Result<Theorem1Report> {
    verify_theorem1_with_budget(n_max, k_max, DEFAULT_STATE_BUDGET)
}

pub fn verify_theorem1_with_budget(
    n_max: u64,
    k_max: usize,
    budget: usize,
) -> Result<Theorem1Report> {
    if k_max < 2 {
        return Err(Error::Precondition(format!(
            "k_max must be at least 2, got {k_max}"
        )));
    }
    let mut instances = Vec::new();
    let mut pass = true;
    for k in 2..=k_max {
        let weights = WeightVector::uniform(k)?;
        for n in 1..=n_max {
            let result = optimal_allocations_with_budget(n, k, &weights, budget)?;
            let balanced = balanced_allocations(n, k)?;
            let matched = result.minimizers == balanced;
            pass &= matched;
            instances.push(Theorem1Instance {
                n,
                k,
                min_value: result.min_value,
                minimizers: result.minimizers,
                balanced,
                matched,
            });
        }
    }
    Ok(Theorem1Report { instances, pass })
}

/// One row of the optimal-vs-balanced distance scan.
#[derive(Clone, Debug)]
pub struct ScanRow {
    pub n: u64,
    /// Among the exact minimizers: smallest balanced distance, then
    /// lexicographically smallest.
    pub optimal: Allocation,
    pub min_value: ExactRational,
    /// L-infinity distance to the nearest balanced allocation.
    pub balanced_distance: u64,
    /// L-infinity distance to the largest-remainder proportional allocation.
    pub proportional_distance: u64,
}

fn linf(a: &Allocation, b: &Allocation) -> u64 {
    a.counts()
        .iter()
        .zip(b.counts())
        .map(|(&x, &y)| x.abs_diff(y))
        .max()
        .unwrap_or(0)
}

fn nearest_balanced_distance(a: &Allocation) -> u64 {
    let family = balanced_allocations(a.total(), a.bins()).expect("k >= 2 by construction");
    family.iter().map(|b| linf(a, b)).min().unwrap_or(0)
}

/// Scans `n = n_from..=n_to` under non-uniform weights, reporting for each
/// ball count an exact minimizer and its distances to the balanced family and
/// the proportional allocation. Uniform weights are rejected: the distance is
/// identically zero there.
pub fn conjecture_scan(
    k: usize,
    weights: &WeightVector,
    n_from: u64,
    n_to: u64,
    budget: usize,
) -> Result<impl Iterator<Item = Result<ScanRow>> + '_> {
    weights.check_len(k)?;
    if weights.is_uniform() {
        return Err(Error::Precondition(
            "scan requires non-uniform weights (balanced allocations are already optimal under uniform weights)".into(),
        ));
    }
    if n_from > n_to {
        return Err(Error::Precondition(format!(
            "empty scan range {n_from}..{n_to}"
        )));
    }
    let weights = weights.clone();
    Ok((n_from..=n_to).map(move |n| {
        let result = optimal_allocations_with_budget(n, k, &weights, budget)?;
        let chosen = result
            .minimizers
            .iter()
            .map(|m| (nearest_balanced_distance(m), m))
            .min_by(|(da, ma), (db, mb)| da.cmp(db).then(ma.cmp(mb)))
            .map(|(d, m)| (d, m.clone()))
            .expect("argmin set is never empty");
        let proportional = proportional_allocation(n, &weights);
        Ok(ScanRow {
            n,
            balanced_distance: chosen.0,
            proportional_distance: linf(&chosen.1, &proportional),
            optimal: chosen.1,
            min_value: result.min_value,
        })
    }))
}
