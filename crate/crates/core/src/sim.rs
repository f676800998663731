//! Seeded Monte Carlo estimation of the remaining-ball law.
//!
//! Three sampling modes share one core loop:
//!
//! * `Discrete` — each step selects among the currently non-empty bins with
//!   renormalized weights; every step removes a ball. The round count equals
//!   the number of effective removals.
//! * `Continuous` — the jump chain of per-bin exponential clocks with rates
//!   proportional to the weights: ticks land on any bin (empty ones pass),
//!   and only the removal order matters for the outputs. Reported rounds
//!   count effective removals, as in discrete mode.
//! * `Literal` — same tick law as continuous, but rounds count every
//!   selection including no-ops on empty bins (wall-clock rounds).
//!
//! Reproducibility: trial `t` draws from a ChaCha8 stream seeded with the
//! configured seed and `set_stream(t)`, so results are byte-identical for
//! identical inputs regardless of thread count or schedule. Aggregation uses
//! exact integer counters; the mean and standard error are computed from the
//! histogram, never from a floating accumulator.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::model::{Allocation, WeightVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SimMode {
    Discrete,
    Continuous,
    Literal,
}

impl std::str::FromStr for SimMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "discrete" => Ok(SimMode::Discrete),
            "continuous" => Ok(SimMode::Continuous),
            "literal" => Ok(SimMode::Literal),
            other => Err(Error::Precondition(format!(
                "unknown mode {other:?} (expected discrete, continuous or literal)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
    pub mode: SimMode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimSummary {
    pub mean_x: f64,
    pub stderr_x: f64,
    pub mean_t: f64,
    pub histogram_x: BTreeMap<u64, u64>,
    pub trials: u64,
}

impl SimSummary {
    pub fn to_json(&self) -> serde_json::Value {
        let hist: serde_json::Map<String, serde_json::Value> = self
            .histogram_x
            .iter()
            .map(|(x, c)| (x.to_string(), serde_json::Value::from(*c)))
            .collect();
        serde_json::json!({
            "mean_x": self.mean_x,
            "stderr_x": self.stderr_x,
            "mean_t": self.mean_t,
            "trials": self.trials,
            "histogram_x": hist,
        })
    }

    /// `value,count` rows of the remaining-ball histogram.
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("value,count\n");
        for (x, c) in &self.histogram_x {
            out.push_str(&format!("{x},{c}\n"));
        }
        out
    }
}

/// Integer weight numerators over one common denominator, for exact
/// (bias-free) categorical sampling with `u128` arithmetic.
fn integer_weights(weights: &WeightVector) -> Result<Vec<u128>> {
    let mut denom = BigInt::from(1u8);
    for w in weights.weights() {
        denom = denom.lcm(w.denom());
    }
    weights
        .weights()
        .iter()
        .map(|w| {
            let scaled = (w * &denom).to_integer();
            debug_assert!(scaled.is_positive());
            scaled.to_u128().ok_or_else(|| {
                Error::InvalidWeights(
                    "weight denominators too large for integer sampling".into(),
                )
            })
        })
        .collect()
}

fn run_trial(rng: &mut ChaCha8Rng, initial: &[u64], wnum: &[u128], mode: SimMode) -> (u64, u64) {
    let mut counts = initial.to_vec();
    let mut non_empty = counts.iter().filter(|&&c| c > 0).count();
    let full_mass: u128 = wnum.iter().sum();
    let mut effective = 0u64;
    let mut rounds = 0u64;
    while non_empty > 1 {
        match mode {
            SimMode::Discrete => {
                let mass: u128 = (0..counts.len())
                    .filter(|&j| counts[j] > 0)
                    .map(|j| wnum[j])
                    .sum();
                let mut draw = rng.random_range(0..mass);
                let mut chosen = 0usize;
                for j in 0..counts.len() {
                    if counts[j] == 0 {
                        continue;
                    }
                    if draw < wnum[j] {
                        chosen = j;
                        break;
                    }
                    draw -= wnum[j];
                }
                counts[chosen] -= 1;
                effective += 1;
                rounds += 1;
                if counts[chosen] == 0 {
                    non_empty -= 1;
                }
            }
            SimMode::Continuous | SimMode::Literal => {
                let mut draw = rng.random_range(0..full_mass);
                let mut chosen = 0usize;
                for j in 0..counts.len() {
                    if draw < wnum[j] {
                        chosen = j;
                        break;
                    }
                    draw -= wnum[j];
                }
                rounds += 1;
                if counts[chosen] > 0 {
                    counts[chosen] -= 1;
                    effective += 1;
                    if counts[chosen] == 0 {
                        non_empty -= 1;
                    }
                }
            }
        }
    }
    let x: u64 = counts.iter().sum();
    let t = match mode {
        SimMode::Literal => rounds,
        _ => effective,
    };
    debug_assert!(mode == SimMode::Literal || x + t == initial.iter().sum::<u64>());
    (x, t)
}

#[derive(Clone, Default)]
struct Accum {
    hist: BTreeMap<u64, u64>,
    sum_t: u128,
}

impl Accum {
    fn merge(mut self, other: Accum) -> Accum {
        for (x, c) in other.hist {
            *self.hist.entry(x).or_insert(0) += c;
        }
        self.sum_t += other.sum_t;
        self
    }
}

/// Runs `config.trials` independent trials and summarizes the sampled law.
pub fn simulate(
    alloc: &Allocation,
    weights: &WeightVector,
    config: &SimConfig,
) -> Result<SimSummary> {
    weights.check_len(alloc.bins())?;
    if config.trials == 0 {
        return Err(Error::Precondition("trials must be at least 1".into()));
    }
    if alloc.total() == 0 {
        return Err(Error::Precondition(
            "simulation needs at least one ball".into(),
        ));
    }
    let wnum = integer_weights(weights)?;
    let initial = alloc.counts().to_vec();
    let seed = config.seed;
    let mode = config.mode;

    let acc = (0..config.trials)
        .into_par_iter()
        .fold(Accum::default, |mut acc, trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial);
            let (x, t) = run_trial(&mut rng, &initial, &wnum, mode);
            *acc.hist.entry(x).or_insert(0) += 1;
            acc.sum_t += t as u128;
            acc
        })
        .reduce(Accum::default, Accum::merge);

    let n = config.trials;
    let mut sum_x: u128 = 0;
    let mut sum_x2: u128 = 0;
    for (&x, &c) in &acc.hist {
        sum_x += (x as u128) * (c as u128);
        sum_x2 += (x as u128) * (x as u128) * (c as u128);
    }
    let nf = n as f64;
    let mean_x = sum_x as f64 / nf;
    let stderr_x = if n > 1 {
        let variance = ((sum_x2 as f64) - (sum_x as f64) * (sum_x as f64) / nf) / (nf - 1.0);
        (variance.max(0.0) / nf).sqrt()
    } else {
        0.0
    };
    Ok(SimSummary {
        mean_x,
        stderr_x,
        mean_t: acc.sum_t as f64 / nf,
        histogram_x: acc.hist,
        trials: n,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct CompareThresholds {
    /// Maximum allowed two-sample z statistic on the means.
    pub z_max: f64,
    /// Minimum chi-square p-value before the histograms count as divergent.
    pub p_min: f64,
}

impl Default for CompareThresholds {
    fn default() -> Self {
        Self {
            z_max: 4.0,
            p_min: 1e-9,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModeComparison {
    pub discrete: SimSummary,
    pub continuous: SimSummary,
    pub z_mean: f64,
    pub chi_square: f64,
    pub chi_df: u64,
    pub chi_p: f64,
    pub agree: bool,
}

impl ModeComparison {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "discrete": self.discrete.to_json(),
            "continuous": self.continuous.to_json(),
            "z_mean": self.z_mean,
            "chi_square": self.chi_square,
            "chi_df": self.chi_df,
            "chi_p": self.chi_p,
            "agree": self.agree,
        })
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Two-sample chi-square statistic over the merged histogram supports.
/// Sparse bins are pooled in key order until each cell holds at least ten
/// combined samples.
fn chi_square_distance(a: &BTreeMap<u64, u64>, b: &BTreeMap<u64, u64>) -> (f64, u64) {
    let keys: std::collections::BTreeSet<u64> = a.keys().chain(b.keys()).copied().collect();
    let mut cells: Vec<(u64, u64)> = Vec::new();
    let mut pending = (0u64, 0u64);
    for key in keys {
        pending.0 += a.get(&key).copied().unwrap_or(0);
        pending.1 += b.get(&key).copied().unwrap_or(0);
        if pending.0 + pending.1 >= 10 {
            cells.push(pending);
            pending = (0, 0);
        }
    }
    if pending != (0, 0) {
        if let Some(last) = cells.last_mut() {
            last.0 += pending.0;
            last.1 += pending.1;
        } else {
            cells.push(pending);
        }
    }
    let n1: f64 = cells.iter().map(|c| c.0 as f64).sum();
    let n2: f64 = cells.iter().map(|c| c.1 as f64).sum();
    if cells.len() < 2 || n1 == 0.0 || n2 == 0.0 {
        return (0.0, 0);
    }
    let total = n1 + n2;
    let mut stat = 0.0;
    for (c1, c2) in &cells {
        let pooled = (*c1 + *c2) as f64;
        let e1 = pooled * n1 / total;
        let e2 = pooled * n2 / total;
        stat += (*c1 as f64 - e1).powi(2) / e1 + (*c2 as f64 - e2).powi(2) / e2;
    }
    (stat, cells.len() as u64 - 1)
}

/// Runs discrete and continuous modes on disjoint seed streams and compares
/// the sampled laws.
pub fn compare_modes(
    alloc: &Allocation,
    weights: &WeightVector,
    trials: u64,
    seed: u64,
) -> Result<ModeComparison> {
    compare_modes_with_thresholds(alloc, weights, trials, seed, CompareThresholds::default())
}

pub fn compare_modes_with_thresholds(
    alloc: &Allocation,
    weights: &WeightVector,
    trials: u64,
    seed: u64,
    thresholds: CompareThresholds,
) -> Result<ModeComparison> {
    let discrete = simulate(
        alloc,
        weights,
        &SimConfig {
            trials,
            seed: splitmix64(seed ^ 0x6469_7363),
            mode: SimMode::Discrete,
        },
    )?;
    let continuous = simulate(
        alloc,
        weights,
        &SimConfig {
            trials,
            seed: splitmix64(seed ^ 0x636f_6e74),
            mode: SimMode::Continuous,
        },
    )?;
    let se = (discrete.stderr_x.powi(2) + continuous.stderr_x.powi(2)).sqrt();
    let diff = (discrete.mean_x - continuous.mean_x).abs();
    let z_mean = if se == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / se
    };
    let (chi_square, chi_df) = chi_square_distance(&discrete.histogram_x, &continuous.histogram_x);
    let chi_p = if chi_df == 0 {
        if chi_square == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ChiSquared::new(chi_df as f64)
            .expect("df >= 1")
            .cdf(chi_square)
    };
    let agree = z_mean <= thresholds.z_max && chi_p >= thresholds.p_min;
    Ok(ModeComparison {
        discrete,
        continuous,
        z_mean,
        chi_square,
        chi_df,
        chi_p,
        agree,
    })
}
