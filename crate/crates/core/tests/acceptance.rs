//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! Run with `cargo test -p lastbin --test acceptance -- --nocapture` to see
//! the per-criterion lines.

use std::collections::BTreeSet;
use std::process::Command;
use std::time::Instant;

use lastbin::events::{
    admissible_instances, verify_coupling_claims, verify_lemma_inequalities, EnumConfig,
};
use lastbin::model::{balanced_allocations, Allocation, WeightVector};
use lastbin::optimizer::{compositions, optimal_allocations, verify_theorem1};
use lastbin::rational::{from_u64, parse_rational, to_f64};
use lastbin::sim::{compare_modes, simulate, SimConfig, SimMode};
use lastbin::solver::{closed_form_b1, closed_form_b2, Solver};

fn pass(n: u32, what: &str) {
    println!("acceptance criterion {n} ({what}): PASS");
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lastbin"))
}

fn run_json(args: &[&str]) -> serde_json::Value {
    let out = bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn criterion_1_weighted_exact_values_bit_exact() {
    let start = Instant::now();
    let five_one = run_json(&["exact", "--alloc", "5,1", "--weights", "5/6,1/6"]);
    let four_two = run_json(&["exact", "--alloc", "4,2", "--weights", "5/6,1/6"]);
    let elapsed = start.elapsed();
    assert_eq!(five_one["f"], "3125/1296");
    assert_eq!(four_two["f"], "139/81");
    // Round-trip: the emitted fraction strings parse back to the exact values.
    assert_eq!(
        parse_rational(five_one["f"].as_str().unwrap()).unwrap(),
        parse_rational("3125/1296").unwrap()
    );
    assert!(
        elapsed.as_secs_f64() < 1.0,
        "two exact queries took {elapsed:?}"
    );
    pass(1, "weighted exact values 3125/1296 and 139/81, under 1s");
}

#[test]
fn criterion_2_balanced_minimizers_up_to_twenty_balls_four_bins() {
    let report = verify_theorem1(20, 4).unwrap();
    assert_eq!(report.instances.len(), 60);
    for inst in &report.instances {
        assert!(
            inst.matched,
            "n={} k={}: minimizers {:?} vs balanced {:?}",
            inst.n, inst.k, inst.minimizers, inst.balanced
        );
    }
    assert!(report.pass);
    pass(2, "minimizer set equals balanced family for n<=20, k<=4");
}

#[test]
fn criterion_3_closed_forms_match_recursion() {
    for p_str in ["1/6", "1/3", "1/2", "5/6"] {
        let p = parse_rational(p_str).unwrap();
        let q = from_u64(1) - &p;
        let weights = WeightVector::new(vec![p.clone(), q]).unwrap();
        let mut solver = Solver::new(weights);
        for a in 1..=12u64 {
            let closed = closed_form_b1(a, &p).unwrap();
            let recursive = solver
                .expected_remaining(&Allocation::new(vec![a, 1]).unwrap())
                .unwrap();
            assert_eq!(closed, recursive, "b=1, a={a}, p={p_str}");
        }
        for a in 0..=12u64 {
            let closed = closed_form_b2(a, &p).unwrap();
            let recursive = solver
                .expected_remaining(&Allocation::new(vec![a, 2]).unwrap())
                .unwrap();
            assert_eq!(closed, recursive, "b=2, a={a}, p={p_str}");
        }
    }
    pass(3, "closed forms equal the recursion for a<=12 at four weightings");
}

#[test]
fn criterion_4_two_bin_balanced_dominance_and_transfer_step() {
    let mut solver = Solver::new(WeightVector::uniform(2).unwrap());
    for n in 1..=30u64 {
        let balanced = Allocation::new(vec![n.div_ceil(2), n / 2]).unwrap();
        let f_balanced = solver.expected_remaining(&balanced).unwrap();
        for a in 0..=n {
            let b = n - a;
            let f = solver
                .expected_remaining(&Allocation::new(vec![a, b]).unwrap())
                .unwrap();
            if a.abs_diff(b) > 1 {
                assert!(f_balanced < f, "strictness fails at ({a},{b})");
            } else {
                assert_eq!(f_balanced, f, "equality fails at ({a},{b})");
            }
            if a >= b + 2 {
                let shifted = solver
                    .expected_remaining(&Allocation::new(vec![a - 1, b + 1]).unwrap())
                    .unwrap();
                assert!(f > shifted, "transfer step fails at ({a},{b})");
            }
        }
    }
    pass(4, "balanced dominance and transfer step exact for n<=30, k=2");
}

#[test]
fn criterion_5_event_machinery_small_instances() {
    let config = EnumConfig::default();
    let instances = admissible_instances(10, 3);
    assert!(!instances.is_empty());
    for (alloc, i) in &instances {
        let weights = WeightVector::uniform(alloc.bins()).unwrap();
        let coupling = verify_coupling_claims(alloc, *i, &weights, &config).unwrap();
        assert!(
            coupling.pass,
            "coupling claims fail on {alloc} i={}: {:#?}",
            i + 1,
            coupling.claims
        );
        let inequalities = verify_lemma_inequalities(alloc, *i, &weights, &config).unwrap();
        assert!(
            inequalities.pass,
            "pair inequalities fail on {alloc} i={}: {:#?}",
            i + 1,
            inequalities.pairs
        );
    }
    pass(
        5,
        "partition, reconstruction, per-trace and inequality checks for total<=10, k<=3",
    );
}

#[test]
fn criterion_6_proof_chain_inequalities() {
    let mut two_bin = Solver::new(WeightVector::uniform(2).unwrap());
    let mut three_bin = Solver::new(WeightVector::uniform(3).unwrap());
    for r in 2..=20u64 {
        let f_r11 = three_bin
            .expected_remaining(&Allocation::new(vec![r - 1, 1, 1]).unwrap())
            .unwrap();
        let f_r1 = two_bin
            .expected_remaining(&Allocation::new(vec![r - 1, 1]).unwrap())
            .unwrap();
        assert!(f_r11 <= f_r1, "three-bin bound fails at r={r}");
        assert!(f_r1 < from_u64(r), "two-bin bound fails at r={r}");
    }
    pass(6, "f(r-1,1,1) <= f(r-1,1) < r for 2 <= r <= 20");
}

#[test]
fn criterion_7_monte_carlo_consistency() {
    let trials = 100_000u64;
    let seed = 0u64;
    let mut weightings: Vec<(usize, WeightVector)> = vec![
        (2, WeightVector::uniform(2).unwrap()),
        (3, WeightVector::uniform(3).unwrap()),
        (2, WeightVector::parse("5/6,1/6").unwrap()),
    ];
    for (k, weights) in weightings.drain(..) {
        let mut solver = Solver::new(weights.clone());
        for total in 1..=8u64 {
            for counts in compositions(total, k) {
                let alloc = Allocation::new(counts).unwrap();
                let exact = to_f64(&solver.expected_remaining(&alloc).unwrap());
                let summary = simulate(
                    &alloc,
                    &weights,
                    &SimConfig {
                        trials,
                        seed,
                        mode: SimMode::Discrete,
                    },
                )
                .unwrap();
                assert!(
                    (summary.mean_x - exact).abs() <= 4.0 * summary.stderr_x,
                    "discrete mean off for {alloc} under {weights}: mean {} exact {exact} se {}",
                    summary.mean_x,
                    summary.stderr_x
                );
                let comparison = compare_modes(&alloc, &weights, trials, seed).unwrap();
                assert!(
                    comparison.z_mean <= 4.0,
                    "modes disagree for {alloc} under {weights}: z = {}",
                    comparison.z_mean
                );
            }
        }
    }
    pass(
        7,
        "discrete within 4 sigma of exact and modes within 4 combined sigma, total<=8, k<=3",
    );
}

#[test]
fn criterion_8_scan_smoke_test() {
    let out = bin()
        .args(["scan", "--k", "2", "--weights", "2/3,1/3", "--n", "3..15"])
        .output()
        .expect("binary runs");
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.trim().lines().collect();
    assert_eq!(lines[0], "n,optimal,min_value,balanced_dist,proportional_dist");
    assert_eq!(lines.len(), 14, "header plus 13 rows");
    for (idx, line) in lines[1..].iter().enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 5, "row {line:?}");
        assert_eq!(fields[0].parse::<u64>().unwrap(), idx as u64 + 3);
        let counts: Vec<u64> = fields[1]
            .split('|')
            .map(|c| c.parse().unwrap())
            .collect();
        assert_eq!(counts.len(), 2);
        assert_eq!(counts.iter().sum::<u64>(), idx as u64 + 3);
        parse_rational(fields[2]).unwrap();
        fields[3].parse::<u64>().unwrap();
        fields[4].parse::<u64>().unwrap();
    }

    // The proportional allocation (5,1) is not optimal at n=6 under (5/6,1/6).
    let weights = WeightVector::parse("5/6,1/6").unwrap();
    let result = optimal_allocations(6, 2, &weights).unwrap();
    let proportional = Allocation::new(vec![5, 1]).unwrap();
    assert!(!result.minimizers.contains(&proportional));
    let balanced: BTreeSet<Allocation> = balanced_allocations(6, 2).unwrap();
    assert!(!balanced.contains(&proportional));
    pass(8, "13 well-formed scan rows; (5,1) not optimal at n=6 under 5/6,1/6");
}
