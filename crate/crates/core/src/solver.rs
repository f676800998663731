//! Exact computation of the expected number of remaining balls.
//!
//! `f(counts)` is defined by: if at most one bin is non-empty, `f` is the
//! total ball count; otherwise select a non-empty bin `j` with probability
//! `w_j / W` (`W` = weight mass of the non-empty bins), remove a ball and
//! recurse. Conditioning on non-empty bins is equivalent to the process that
//! lets empty-bin selections pass as no-ops, and keeps the recursion finite.
//!
//! Two-bin closed forms for second-bin counts of one and two are provided and
//! cross-checked against the recursion in the tests.
//!
//! A `Solver` owns its memo table and is single-writer; independent instances
//! can run concurrently. Memo keys are canonicalized by descending sort only
//! when the weights are exactly uniform (any non-uniformity disables the
//! symmetry reduction entirely). For fixed `k` the table grows like `n^k`
//! (roughly `n^k / k!` under the uniform sort), so the default budget of 1e7
//! states covers e.g. k=2 up to n in the thousands and k=4 up to n around a
//! couple hundred.

use std::collections::HashMap;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::model::{Allocation, WeightVector};
use crate::rational::{from_u64, ExactRational};

/// Default cap on distinct memoized states.
pub const DEFAULT_STATE_BUDGET: usize = 10_000_000;

pub struct Solver {
    weights: WeightVector,
    uniform: bool,
    memo: HashMap<Vec<u64>, ExactRational>,
    budget: usize,
}

impl Solver {
    pub fn new(weights: WeightVector) -> Self {
        Self::with_budget(weights, DEFAULT_STATE_BUDGET)
    }

    pub fn with_budget(weights: WeightVector, budget: usize) -> Self {
        let uniform = weights.is_uniform();
        Self {
            weights,
            uniform,
            memo: HashMap::new(),
            budget,
        }
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    /// Number of distinct states evaluated so far.
    pub fn states_evaluated(&self) -> usize {
        self.memo.len()
    }

    /// Expected number of balls in the last non-empty bin, exactly.
    pub fn expected_remaining(&mut self, alloc: &Allocation) -> Result<ExactRational> {
        self.weights.check_len(alloc.bins())?;
        let key = self.canonical(alloc.counts());
        self.eval(key)
    }

    /// `f(alloc) - f(alloc - e_from + e_to)`: the exact change in expected
    /// remaining balls from moving one ball between bins.
    pub fn marginal_delta(
        &mut self,
        alloc: &Allocation,
        from: usize,
        to: usize,
    ) -> Result<ExactRational> {
        if from == to {
            return Err(Error::Precondition(
                "marginal delta of a bin against itself is degenerate (always 0)".into(),
            ));
        }
        let shifted = alloc.transfer(from, to)?;
        let base = self.expected_remaining(alloc)?;
        let moved = self.expected_remaining(&shifted)?;
        Ok(base - moved)
    }

    fn canonical(&self, counts: &[u64]) -> Vec<u64> {
        let mut key = counts.to_vec();
        if self.uniform {
            key.sort_unstable_by(|a, b| b.cmp(a));
        }
        key
    }

    fn child(&self, key: &[u64], j: usize) -> Vec<u64> {
        let mut child = key.to_vec();
        child[j] -= 1;
        if self.uniform {
            child.sort_unstable_by(|a, b| b.cmp(a));
        }
        child
    }

    fn insert(&mut self, key: Vec<u64>, value: ExactRational) -> Result<()> {
        if self.memo.len() >= self.budget {
            return Err(Error::BudgetExceeded(format!(
                "memo table reached the configured cap of {} states",
                self.budget
            )));
        }
        self.memo.insert(key, value);
        Ok(())
    }

    /// Iterative post-order evaluation; states are resolved in dependency
    /// order via an explicit stack, so deep recursions cannot overflow.
    fn eval(&mut self, key: Vec<u64>) -> Result<ExactRational> {
        if let Some(v) = self.memo.get(&key) {
            return Ok(v.clone());
        }
        let mut stack = vec![key.clone()];
        while let Some(top) = stack.last().cloned() {
            if self.memo.contains_key(&top) {
                stack.pop();
                continue;
            }
            let nonempty: Vec<usize> = (0..top.len()).filter(|&j| top[j] > 0).collect();
            if nonempty.len() <= 1 {
                let total: u64 = top.iter().sum();
                self.insert(top, from_u64(total))?;
                stack.pop();
                continue;
            }
            let mut missing = Vec::new();
            for &j in &nonempty {
                let child = self.child(&top, j);
                if !self.memo.contains_key(&child) {
                    missing.push(child);
                }
            }
            if missing.is_empty() {
                let mass: ExactRational = nonempty
                    .iter()
                    .map(|&j| self.weights.weight(j).clone())
                    .sum();
                let mut value = ExactRational::zero();
                for &j in &nonempty {
                    let child = self.child(&top, j);
                    value += self.weights.weight(j) / &mass * &self.memo[&child];
                }
                self.insert(top, value)?;
                stack.pop();
            } else {
                stack.extend(missing);
            }
        }
        Ok(self.memo[&key].clone())
    }
}

/// One-shot convenience wrapper around a fresh [`Solver`].
pub fn expected_remaining(alloc: &Allocation, weights: &WeightVector) -> Result<ExactRational> {
    Solver::new(weights.clone()).expected_remaining(alloc)
}

/// One-shot [`Solver::marginal_delta`].
pub fn marginal_delta(
    alloc: &Allocation,
    from: usize,
    to: usize,
    weights: &WeightVector,
) -> Result<ExactRational> {
    Solver::new(weights.clone()).marginal_delta(alloc, from, to)
}

fn check_open_unit_interval(p: &ExactRational) -> Result<()> {
    if *p <= ExactRational::zero() || *p >= ExactRational::one() {
        return Err(Error::Precondition(format!(
            "first-bin probability must lie strictly between 0 and 1, got {p}"
        )));
    }
    Ok(())
}

fn pow(p: &ExactRational, a: u64) -> ExactRational {
    num_traits::pow::pow(p.clone(), a as usize)
}

/// Two-bin closed form for a second bin holding one ball:
/// `f_p(a, 1) = a - (p - p^a) / (1 - p)` for `a >= 1`.
pub fn closed_form_b1(a: u64, p: &ExactRational) -> Result<ExactRational> {
    check_open_unit_interval(p)?;
    if a < 1 {
        return Err(Error::Precondition(
            "closed form for second-bin count 1 needs a >= 1".into(),
        ));
    }
    let one = ExactRational::one();
    Ok(from_u64(a) - (p - pow(p, a)) / (&one - p))
}

/// Two-bin closed form for a second bin holding two balls:
/// `f_p(a, 2) = a + 2 - 2/(1-p) + p^a (a + 2 + 2p/(1-p))` for `a >= 0`.
pub fn closed_form_b2(a: u64, p: &ExactRational) -> Result<ExactRational> {
    check_open_unit_interval(p)?;
    let one = ExactRational::one();
    let q = &one - p;
    let two = from_u64(2);
    Ok(from_u64(a) + &two - &two / &q + pow(p, a) * (from_u64(a) + &two + &two * p / &q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{parse_rational, ratio};
    use proptest::prelude::*;

    fn alloc(counts: &[u64]) -> Allocation {
        Allocation::new(counts.to_vec()).unwrap()
    }

    fn uniform(k: usize) -> WeightVector {
        WeightVector::uniform(k).unwrap()
    }

    /// Independent oracle: walks the whole tree of effective selections and
    /// sums probability-weighted remaining balls at the leaves. No memo, no
    /// key canonicalization; shares nothing with the solver path.
    fn bruteforce(counts: &mut Vec<u64>, prob: &ExactRational, w: &WeightVector) -> ExactRational {
        let nonempty: Vec<usize> = (0..counts.len()).filter(|&j| counts[j] > 0).collect();
        if nonempty.len() <= 1 {
            return prob * from_u64(counts.iter().sum());
        }
        let mass: ExactRational = nonempty.iter().map(|&j| w.weight(j).clone()).sum();
        let mut acc = ExactRational::zero();
        for &j in &nonempty {
            let step_prob = prob * w.weight(j) / &mass;
            counts[j] -= 1;
            acc += bruteforce(counts, &step_prob, w);
            counts[j] += 1;
        }
        acc
    }

    #[test]
    fn base_cases() {
        let w = uniform(2);
        assert_eq!(expected_remaining(&alloc(&[2, 0]), &w).unwrap(), from_u64(2));
        assert_eq!(expected_remaining(&alloc(&[0, 5]), &w).unwrap(), from_u64(5));
        assert_eq!(expected_remaining(&alloc(&[1, 1]), &w).unwrap(), from_u64(1));
        assert_eq!(expected_remaining(&alloc(&[0, 0]), &w).unwrap(), from_u64(0));
    }

    #[test]
    fn uniform_small_values() {
        let w = uniform(2);
        assert_eq!(expected_remaining(&alloc(&[2, 1]), &w).unwrap(), ratio(3, 2));
        assert_eq!(expected_remaining(&alloc(&[3, 1]), &w).unwrap(), ratio(9, 4));
        assert_eq!(expected_remaining(&alloc(&[2, 2]), &w).unwrap(), ratio(3, 2));
        let w3 = uniform(3);
        assert_eq!(
            expected_remaining(&alloc(&[2, 1, 1]), &w3).unwrap(),
            ratio(4, 3)
        );
        assert_eq!(
            expected_remaining(&alloc(&[3, 1, 1]), &w3).unwrap(),
            ratio(35, 18)
        );
    }

    #[test]
    fn weighted_counterexample_values() {
        let w = WeightVector::parse("5/6,1/6").unwrap();
        assert_eq!(
            expected_remaining(&alloc(&[5, 1]), &w).unwrap(),
            ratio(3125, 1296)
        );
        assert_eq!(
            expected_remaining(&alloc(&[4, 2]), &w).unwrap(),
            ratio(139, 81)
        );
    }

    #[test]
    fn closed_form_b1_values() {
        let p = parse_rational("5/6").unwrap();
        assert_eq!(closed_form_b1(5, &p).unwrap(), ratio(3125, 1296));
        for p_str in ["1/6", "1/3", "1/2", "5/6"] {
            let p = parse_rational(p_str).unwrap();
            assert_eq!(closed_form_b1(1, &p).unwrap(), from_u64(1));
        }
        assert_eq!(
            closed_form_b1(3, &ratio(1, 2)).unwrap(),
            ratio(9, 4)
        );
        assert!(closed_form_b1(0, &ratio(1, 2)).is_err());
        assert!(closed_form_b1(3, &from_u64(1)).is_err());
        assert!(closed_form_b1(3, &ratio(7, 6)).is_err());
    }

    #[test]
    fn closed_form_b2_values() {
        let p = parse_rational("5/6").unwrap();
        assert_eq!(closed_form_b2(4, &p).unwrap(), ratio(139, 81));
        for p_str in ["1/6", "1/3", "1/2", "5/6"] {
            let p = parse_rational(p_str).unwrap();
            assert_eq!(closed_form_b2(0, &p).unwrap(), from_u64(2));
        }
        assert_eq!(closed_form_b2(2, &ratio(1, 2)).unwrap(), ratio(3, 2));
        assert!(closed_form_b2(2, &from_u64(0)).is_err());
    }

    #[test]
    fn marginal_delta_values() {
        let w = uniform(2);
        let d = marginal_delta(&alloc(&[3, 1]), 0, 1, &w).unwrap();
        assert!(d > ExactRational::zero());
        assert_eq!(d, ratio(3, 4));

        let d = marginal_delta(&alloc(&[2, 1]), 0, 1, &w).unwrap();
        assert_eq!(d, ExactRational::zero());

        let w = WeightVector::parse("5/6,1/6").unwrap();
        let d = marginal_delta(&alloc(&[5, 1]), 0, 1, &w).unwrap();
        assert_eq!(d, ratio(901, 1296));

        assert!(matches!(
            marginal_delta(&alloc(&[3, 1]), 0, 0, &uniform(2)),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            marginal_delta(&alloc(&[0, 1]), 0, 1, &uniform(2)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn brute_force_equivalence_small() {
        // Every allocation with total <= 8, k <= 3, against the trace-tree
        // oracle, for uniform and a lopsided weighting.
        let weightings: Vec<(usize, WeightVector)> = vec![
            (2, uniform(2)),
            (3, uniform(3)),
            (2, WeightVector::parse("5/6,1/6").unwrap()),
            (3, WeightVector::parse("1/2,1/3,1/6").unwrap()),
        ];
        for (k, w) in weightings {
            let mut solver = Solver::new(w.clone());
            for total in 0..=8u64 {
                for counts in crate::optimizer::compositions(total, k) {
                    let a = Allocation::new(counts.clone()).unwrap();
                    let exact = solver.expected_remaining(&a).unwrap();
                    let oracle = bruteforce(&mut counts.clone(), &ExactRational::one(), &w);
                    assert_eq!(exact, oracle, "alloc {a} weights {w}");
                }
            }
        }
    }

    #[test]
    fn memo_budget_is_enforced() {
        let mut solver = Solver::with_budget(uniform(2), 3);
        let err = solver.expected_remaining(&alloc(&[10, 10])).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded(_)));
    }

    #[test]
    fn length_mismatch_rejected() {
        let mut solver = Solver::new(uniform(3));
        assert!(matches!(
            solver.expected_remaining(&alloc(&[1, 1])),
            Err(Error::LengthMismatch(_))
        ));
    }

    #[test]
    fn uniform_keys_collapse_permutations() {
        let mut solver = Solver::new(uniform(3));
        let a = solver.expected_remaining(&alloc(&[4, 2, 1])).unwrap();
        let states = solver.states_evaluated();
        let b = solver.expected_remaining(&alloc(&[1, 2, 4])).unwrap();
        assert_eq!(a, b);
        // The permuted query hits the memo without adding states.
        assert_eq!(solver.states_evaluated(), states);

        let mut skewed = Solver::new(WeightVector::parse("1/2,1/3,1/6").unwrap());
        let a = skewed.expected_remaining(&alloc(&[4, 2, 1])).unwrap();
        let b = skewed.expected_remaining(&alloc(&[1, 2, 4])).unwrap();
        assert_ne!(a, b);
    }

    proptest! {
        #[test]
        fn permutation_symmetry_under_uniform_weights(
            counts in proptest::collection::vec(0u64..8, 2..5),
            swap in (0usize..4, 0usize..4),
        ) {
            prop_assume!(counts.iter().sum::<u64>() <= 14);
            let k = counts.len();
            let w = uniform(k);
            let a = Allocation::new(counts.clone()).unwrap();
            let mut permuted = counts;
            permuted.swap(swap.0 % k, swap.1 % k);
            let b = Allocation::new(permuted).unwrap();
            prop_assert_eq!(
                expected_remaining(&a, &w).unwrap(),
                expected_remaining(&b, &w).unwrap()
            );
        }

        #[test]
        fn value_bounds(
            counts in proptest::collection::vec(0u64..8, 2..5),
        ) {
            prop_assume!(counts.iter().sum::<u64>() >= 1);
            let a = Allocation::new(counts.clone()).unwrap();
            let w = uniform(counts.len());
            let f = expected_remaining(&a, &w).unwrap();
            prop_assert!(f >= from_u64(1));
            prop_assert!(f <= from_u64(a.total()));
            if a.non_empty_bins() == 1 {
                prop_assert_eq!(f, from_u64(a.total()));
            }
        }
    }
}
