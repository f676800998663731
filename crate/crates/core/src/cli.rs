//! Command-line interface: exact queries, optimization, event tables,
//! simulation, verification sweeps and the weighted scan.
//!
//! Output goes to stdout as JSON (default) or CSV; diagnostics go to stderr.
//! Exit codes: 0 success (for `verify`: all checks passed), 1 validation or
//! check failure, 2 resource-budget exhaustion.

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::events::{self, EnumConfig, DEFAULT_NODE_BUDGET};
use crate::model::{Allocation, WeightVector};
use crate::optimizer;
use crate::rational::{decimal_f64, from_u64, parse_rational};
use crate::sim::{self, SimConfig, SimMode};
use crate::solver::{self, Solver, DEFAULT_STATE_BUDGET};

#[derive(Parser)]
#[command(
    name = "lastbin",
    about = "Exact and stochastic analysis of the balls-in-bins removal process",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact expected number of remaining balls for one allocation.
    Exact {
        /// Comma-separated ball counts, e.g. "5,1".
        #[arg(long)]
        alloc: String,
        /// Comma-separated selection probabilities, e.g. "5/6,1/6".
        /// Defaults to the uniform distribution.
        #[arg(long)]
        weights: Option<String>,
        /// Fractional digits in the decimal approximation.
        #[arg(long, default_value_t = 6)]
        digits: usize,
        /// Cap on exact-solver memo states.
        #[arg(long, default_value_t = DEFAULT_STATE_BUDGET as u64)]
        budget: u64,
    },
    /// Exact argmin set over all allocations of n balls into k bins.
    Optimize {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        k: usize,
        /// Defaults to the uniform distribution on k bins.
        #[arg(long)]
        weights: Option<String>,
        #[arg(long, default_value_t = 6)]
        digits: usize,
        #[arg(long, default_value_t = DEFAULT_STATE_BUDGET as u64)]
        budget: u64,
    },
    /// Event-partition probabilities and conditional expectations for an
    /// allocation whose first bin is maximal and exceeds bin i by >= 2.
    Events {
        #[arg(long)]
        alloc: String,
        /// Comparison bin (1-based; bin 1 is the first entry of --alloc).
        /// Defaults to the lowest-indexed minimum-count bin other than bin 1.
        #[arg(long)]
        i: Option<usize>,
        #[arg(long)]
        weights: Option<String>,
        /// Output format.
        #[arg(long, default_value = "json", value_parser = ["json", "csv"])]
        format: String,
        /// Cap on enumeration tree nodes.
        #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
        budget: u64,
    },
    /// Seeded Monte Carlo estimate of the remaining-ball law.
    Simulate {
        #[arg(long)]
        alloc: String,
        #[arg(long)]
        weights: Option<String>,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// discrete: removals among non-empty bins; continuous: exponential
        /// tick race over all bins (rounds count effective removals);
        /// literal: tick race with wall-clock rounds.
        #[arg(long, default_value = "discrete", value_parser = ["discrete", "continuous", "literal"])]
        mode: String,
        /// Emit the remaining-ball histogram as CSV instead of the summary.
        #[arg(long, default_value_t = false)]
        hist: bool,
        /// Run discrete and continuous modes on disjoint seed streams and
        /// report their agreement instead of a single summary.
        #[arg(long, default_value_t = false)]
        compare: bool,
    },
    /// Verification sweeps. Exits 0 only if every check passes.
    Verify {
        /// theorem1 | lemma1 | closed-forms | proof-chain | events | montecarlo
        #[arg(long, value_parser = [
            "theorem1", "lemma1", "closed-forms", "proof-chain", "events", "montecarlo",
        ])]
        suite: String,
        /// Largest ball count (theorem1: default 20, lemma1: default 30).
        #[arg(long)]
        n_max: Option<u64>,
        /// Largest bin count (theorem1: default 4, events/montecarlo: default 3).
        #[arg(long)]
        k_max: Option<usize>,
        /// Largest total ball count (events: default 10, montecarlo: default 8).
        #[arg(long)]
        total_max: Option<u64>,
        /// Largest r in the proof-chain inequalities (default 20).
        #[arg(long)]
        r_max: Option<u64>,
        /// Largest first-bin count in the closed-form sweep (default 12).
        #[arg(long)]
        a_max: Option<u64>,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Cap on solver memo states and enumeration nodes.
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Scan n over a range under non-uniform weights, comparing the optimal
    /// allocation against the balanced family and the proportional one.
    Scan {
        #[arg(long)]
        k: usize,
        /// Non-uniform weights (the scan is trivial under uniform weights).
        #[arg(long)]
        weights: String,
        /// Inclusive range, e.g. "3..15".
        #[arg(long)]
        n: String,
        #[arg(long, default_value_t = DEFAULT_STATE_BUDGET as u64)]
        budget: u64,
    },
}

/// Entry point used by `main`; returns the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(pass) => {
            if pass {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::BudgetExceeded(_) => 2,
                _ => 1,
            }
        }
    }
}

fn parse_weights(spec: &Option<String>, k: usize) -> Result<WeightVector> {
    match spec {
        Some(s) => {
            let w = WeightVector::parse(s)?;
            w.check_len(k)?;
            Ok(w)
        }
        None => WeightVector::uniform(k),
    }
}

fn default_i(alloc: &Allocation) -> Result<usize> {
    (1..alloc.bins())
        .min_by_key(|&j| alloc.count(j))
        .ok_or_else(|| Error::InvalidIndex("allocation has no bin other than the first".into()))
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Exact {
            alloc,
            weights,
            digits,
            budget,
        } => {
            let parts: Vec<&str> = alloc.split(',').collect();
            if parts.len() == 1 {
                // Single-bin extension: the process never runs, f equals the
                // total. Flagged so downstream tooling can tell it apart.
                let count: u64 = parts[0].trim().parse().map_err(|_| {
                    Error::InvalidAllocation(format!("cannot parse {:?} as a ball count", parts[0]))
                })?;
                if weights.is_some() {
                    return Err(Error::LengthMismatch(
                        "weights are meaningless for a single bin".into(),
                    ));
                }
                let value = from_u64(count);
                println!(
                    "{}",
                    serde_json::json!({
                        "alloc": alloc,
                        "f": value.to_string(),
                        "approx": decimal_f64(&value, digits),
                        "note": "single-bin input: no removals can change the last bin",
                    })
                );
                return Ok(true);
            }
            let alloc = Allocation::parse(&alloc)?;
            let weights = parse_weights(&weights, alloc.bins())?;
            let mut solver = Solver::with_budget(weights.clone(), budget as usize);
            let value = solver.expected_remaining(&alloc)?;
            println!(
                "{}",
                serde_json::json!({
                    "alloc": alloc.to_string(),
                    "weights": weights.to_string(),
                    "f": value.to_string(),
                    "approx": decimal_f64(&value, digits),
                })
            );
            Ok(true)
        }
        Command::Optimize {
            n,
            k,
            weights,
            digits,
            budget,
        } => {
            let weights = parse_weights(&weights, k)?;
            let result = optimizer::optimal_allocations_with_budget(n, k, &weights, budget as usize)?;
            let minimizers: Vec<String> =
                result.minimizers.iter().map(|a| a.to_string()).collect();
            println!(
                "{}",
                serde_json::json!({
                    "n": n,
                    "k": k,
                    "weights": weights.to_string(),
                    "minimizers": minimizers,
                    "min_value": result.min_value.to_string(),
                    "approx": decimal_f64(&result.min_value, digits),
                    "evaluated": result.evaluated,
                    "used_symmetry": result.used_symmetry,
                })
            );
            Ok(true)
        }
        Command::Events {
            alloc,
            i,
            weights,
            format,
            budget,
        } => {
            let alloc = Allocation::parse(&alloc)?;
            let weights = parse_weights(&weights, alloc.bins())?;
            let i_zero = match i {
                Some(one_based) => {
                    if one_based < 1 || one_based > alloc.bins() {
                        return Err(Error::InvalidIndex(format!(
                            "--i must lie in 1..={}, got {one_based}",
                            alloc.bins()
                        )));
                    }
                    one_based - 1
                }
                None => default_i(&alloc)?,
            };
            let config = EnumConfig {
                node_budget: budget,
            };
            let table = events::event_distribution(&alloc, i_zero, &weights, &config)?;
            if format == "csv" {
                print!("{}", table.to_csv());
            } else {
                let mut solver = Solver::new(weights.clone());
                let f_n = solver.expected_remaining(&alloc)?;
                let f_shifted = solver.expected_remaining(&alloc.transfer(0, i_zero)?)?;
                let mut value = table.to_json();
                let obj = value.as_object_mut().expect("table json is an object");
                obj.insert("alloc".into(), alloc.to_string().into());
                obj.insert("i".into(), ((i_zero + 1) as u64).into());
                obj.insert("weights".into(), weights.to_string().into());
                obj.insert("f".into(), f_n.to_string().into());
                obj.insert("f_shifted".into(), f_shifted.to_string().into());
                obj.insert(
                    "outside_proven_scope".into(),
                    (!weights.is_uniform()).into(),
                );
                println!("{value}");
            }
            Ok(true)
        }
        Command::Simulate {
            alloc,
            weights,
            trials,
            seed,
            mode,
            hist,
            compare,
        } => {
            let alloc = Allocation::parse(&alloc)?;
            let weights = parse_weights(&weights, alloc.bins())?;
            if compare {
                let report = sim::compare_modes(&alloc, &weights, trials, seed)?;
                println!("{}", report.to_json());
                return Ok(true);
            }
            let mode: SimMode = mode.parse()?;
            let summary = sim::simulate(
                &alloc,
                &weights,
                &SimConfig {
                    trials,
                    seed,
                    mode,
                },
            )?;
            if hist {
                print!("{}", summary.histogram_csv());
            } else {
                println!("{}", summary.to_json());
            }
            Ok(true)
        }
        Command::Verify {
            suite,
            n_max,
            k_max,
            total_max,
            r_max,
            a_max,
            trials,
            seed,
            budget,
        } => match suite.as_str() {
            "theorem1" => verify_theorem1_suite(
                n_max.unwrap_or(20),
                k_max.unwrap_or(4),
                budget.unwrap_or(DEFAULT_STATE_BUDGET as u64) as usize,
            ),
            "lemma1" => verify_lemma1_suite(n_max.unwrap_or(30)),
            "closed-forms" => verify_closed_forms_suite(a_max.unwrap_or(12)),
            "proof-chain" => verify_proof_chain_suite(r_max.unwrap_or(20)),
            "events" => verify_events_suite(
                total_max.unwrap_or(10),
                k_max.unwrap_or(3),
                budget.unwrap_or(DEFAULT_NODE_BUDGET),
            ),
            "montecarlo" => verify_montecarlo_suite(
                total_max.unwrap_or(8),
                k_max.unwrap_or(3),
                trials,
                seed,
            ),
            other => Err(Error::Precondition(format!("unknown suite {other:?}"))),
        },
        Command::Scan {
            k,
            weights,
            n,
            budget,
        } => {
            let weights = WeightVector::parse(&weights)?;
            weights.check_len(k)?;
            let (from, to) = parse_range(&n)?;
            let rows = optimizer::conjecture_scan(k, &weights, from, to, budget as usize)?;
            println!("n,optimal,min_value,balanced_dist,proportional_dist");
            for row in rows {
                match row {
                    Ok(row) => {
                        let optimal = row
                            .optimal
                            .counts()
                            .iter()
                            .map(|c| c.to_string())
                            .collect::<Vec<_>>()
                            .join("|");
                        println!(
                            "{},{},{},{},{}",
                            row.n,
                            optimal,
                            row.min_value,
                            row.balanced_distance,
                            row.proportional_distance
                        );
                    }
                    Err(e) => {
                        println!("# partial output: {e}");
                        return Err(e);
                    }
                }
            }
            Ok(true)
        }
    }
}

fn parse_range(spec: &str) -> Result<(u64, u64)> {
    let err = || {
        Error::Precondition(format!(
            "cannot parse range {spec:?}; expected inclusive form like 3..15"
        ))
    };
    let (from, to) = spec.split_once("..").ok_or_else(err)?;
    let from: u64 = from.trim().parse().map_err(|_| err())?;
    let to: u64 = to.trim().parse().map_err(|_| err())?;
    if from > to {
        return Err(err());
    }
    Ok((from, to))
}

fn report_line(ok: bool, label: &str) {
    if ok {
        println!("ok   {label}");
    } else {
        println!("FAIL {label}");
    }
}

fn verify_theorem1_suite(n_max: u64, k_max: usize, budget: usize) -> Result<bool> {
    let report = optimizer::verify_theorem1_with_budget(n_max, k_max, budget)?;
    for inst in &report.instances {
        report_line(
            inst.matched,
            &format!(
                "theorem1 n={} k={} min={} minimizers={}",
                inst.n,
                inst.k,
                inst.min_value,
                inst.minimizers
                    .iter()
                    .map(|a| a.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            ),
        );
        if !inst.matched {
            println!(
                "     expected balanced family: {}",
                inst.balanced
                    .iter()
                    .map(|a| a.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            );
        }
    }
    println!(
        "theorem1: {}/{} instances matched",
        report.instances.iter().filter(|i| i.matched).count(),
        report.instances.len()
    );
    Ok(report.pass)
}

fn verify_lemma1_suite(n_max: u64) -> Result<bool> {
    let weights = WeightVector::uniform(2)?;
    let mut solver = Solver::new(weights);
    let mut pass = true;
    for n in 1..=n_max {
        let balanced = Allocation::new(vec![n.div_ceil(2), n / 2])?;
        let f_balanced = solver.expected_remaining(&balanced)?;
        let mut n_ok = true;
        for a in 0..=n {
            let b = n - a;
            let f = solver.expected_remaining(&Allocation::new(vec![a, b])?)?;
            let gap = a.abs_diff(b);
            n_ok &= if gap > 1 {
                f_balanced < f
            } else {
                f_balanced == f
            };
            if a >= b + 2 {
                let shifted = solver.expected_remaining(&Allocation::new(vec![a - 1, b + 1])?)?;
                n_ok &= f > shifted;
            }
        }
        report_line(n_ok, &format!("lemma1 n={n} balanced f={f_balanced}"));
        pass &= n_ok;
    }
    Ok(pass)
}

fn verify_closed_forms_suite(a_max: u64) -> Result<bool> {
    let mut pass = true;
    for p_str in ["1/6", "1/3", "1/2", "5/6"] {
        let p = parse_rational(p_str)?;
        let q = from_u64(1) - &p;
        let weights = WeightVector::new(vec![p.clone(), q])?;
        let mut solver = Solver::new(weights);
        let mut p_ok = true;
        for a in 1..=a_max {
            let closed = solver::closed_form_b1(a, &p)?;
            let recursive = solver.expected_remaining(&Allocation::new(vec![a, 1])?)?;
            p_ok &= closed == recursive;
        }
        for a in 0..=a_max {
            let closed = solver::closed_form_b2(a, &p)?;
            let recursive = solver.expected_remaining(&Allocation::new(vec![a, 2])?)?;
            p_ok &= closed == recursive;
        }
        report_line(p_ok, &format!("closed-forms p={p_str} a<={a_max}"));
        pass &= p_ok;
    }
    Ok(pass)
}

fn verify_proof_chain_suite(r_max: u64) -> Result<bool> {
    let mut two_bin = Solver::new(WeightVector::uniform(2)?);
    let mut three_bin = Solver::new(WeightVector::uniform(3)?);
    let mut pass = true;
    for r in 2..=r_max {
        let f_r11 = three_bin.expected_remaining(&Allocation::new(vec![r - 1, 1, 1])?)?;
        let f_r1 = two_bin.expected_remaining(&Allocation::new(vec![r - 1, 1])?)?;
        let ok = f_r11 <= f_r1 && f_r1 < from_u64(r);
        report_line(
            ok,
            &format!("proof-chain r={r}: f(r-1,1,1)={f_r11} <= f(r-1,1)={f_r1} < {r}"),
        );
        pass &= ok;
    }
    Ok(pass)
}

fn verify_events_suite(total_max: u64, k_max: usize, node_budget: u64) -> Result<bool> {
    let config = EnumConfig {
        node_budget,
    };
    let mut pass = true;
    let mut count = 0usize;
    for (alloc, i) in events::admissible_instances(total_max, k_max) {
        let weights = WeightVector::uniform(alloc.bins())?;
        let coupling = events::verify_coupling_claims(&alloc, i, &weights, &config)?;
        let inequalities = events::verify_lemma_inequalities(&alloc, i, &weights, &config)?;
        let ok = coupling.pass && inequalities.pass;
        report_line(ok, &format!("events alloc={alloc} i={}", i + 1));
        if !ok {
            for claim in coupling.claims.iter().filter(|c| {
                matches!(c.status, events::ClaimStatus::Fail { .. })
            }) {
                println!("     failed claim: {} ({:?})", claim.name, claim.status);
            }
            for pair in inequalities.pairs.iter().filter(|p| !p.full_ok || !p.minus_ok) {
                println!("     failed inequality at j={} r={}", pair.j + 1, pair.r);
            }
        }
        pass &= ok;
        count += 1;
    }
    println!("events: {count} instances checked");
    Ok(pass)
}

fn verify_montecarlo_suite(
    total_max: u64,
    k_max: usize,
    trials: u64,
    seed: u64,
) -> Result<bool> {
    let mut pass = true;
    let mut weightings: Vec<(usize, WeightVector)> = Vec::new();
    for k in 2..=k_max {
        weightings.push((k, WeightVector::uniform(k)?));
    }
    weightings.push((2, WeightVector::parse("5/6,1/6")?));
    for (k, weights) in weightings {
        let mut solver = Solver::new(weights.clone());
        for total in 1..=total_max {
            for counts in optimizer::compositions(total, k) {
                let alloc = Allocation::new(counts)?;
                let exact = crate::rational::to_f64(&solver.expected_remaining(&alloc)?);
                let summary = sim::simulate(
                    &alloc,
                    &weights,
                    &SimConfig {
                        trials,
                        seed,
                        mode: SimMode::Discrete,
                    },
                )?;
                let within = (summary.mean_x - exact).abs() <= 4.0 * summary.stderr_x;
                let comparison = sim::compare_modes(&alloc, &weights, trials, seed)?;
                let ok = within && comparison.agree;
                report_line(
                    ok,
                    &format!(
                        "montecarlo alloc={alloc} weights={weights} mean={:.4} exact={exact:.4} z={:.2}",
                        summary.mean_x, comparison.z_mean
                    ),
                );
                pass &= ok;
            }
        }
    }
    Ok(pass)
}
