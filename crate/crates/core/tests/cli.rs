//! End-to-end checks of the command-line surface: output shapes, exit codes
//! and determinism.

use std::process::{Command, Output};

use lastbin::rational::parse_rational;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lastbin"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn exact_default_uniform_weights() {
    let out = run(&["exact", "--alloc", "1,1"]);
    assert!(out.status.success());
    let json = stdout_json(&out);
    assert_eq!(json["f"], "1");
    assert_eq!(json["approx"], 1.0);
    assert_eq!(json["weights"], "1/2,1/2");
}

#[test]
fn exact_fraction_round_trips() {
    let out = run(&["exact", "--alloc", "5,1", "--weights", "5/6,1/6"]);
    let json = stdout_json(&out);
    let f = parse_rational(json["f"].as_str().unwrap()).unwrap();
    assert_eq!(f, parse_rational("3125/1296").unwrap());
    assert_eq!(json["approx"], 2.411265);
}

#[test]
fn exact_single_bin_is_flagged() {
    let out = run(&["exact", "--alloc", "7"]);
    assert!(out.status.success());
    let json = stdout_json(&out);
    assert_eq!(json["f"], "7");
    assert!(json["note"].as_str().unwrap().contains("single-bin"));
}

#[test]
fn exact_rejects_malformed_fraction() {
    let out = run(&["exact", "--alloc", "2,1", "--weights", "5/6,1/x"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error: invalid fraction:"), "{stderr}");
}

#[test]
fn exact_rejects_length_mismatch() {
    let out = run(&["exact", "--alloc", "2,1,1", "--weights", "1/2,1/2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error: length mismatch:"));
}

#[test]
fn budget_exhaustion_exits_two() {
    let out = run(&["exact", "--alloc", "30,30", "--budget", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error: budget exceeded:"));

    let out = run(&["events", "--alloc", "5,2,1", "--i", "2", "--budget", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn optimize_reports_minimizers() {
    let out = run(&["optimize", "--n", "4", "--k", "2"]);
    let json = stdout_json(&out);
    assert_eq!(json["minimizers"], serde_json::json!(["2,2"]));
    assert_eq!(json["min_value"], "3/2");
    assert_eq!(json["used_symmetry"], true);

    let out = run(&["optimize", "--n", "6", "--k", "2", "--weights", "5/6,1/6"]);
    let json = stdout_json(&out);
    assert_eq!(json["minimizers"], serde_json::json!(["4,2"]));
    assert_eq!(json["min_value"], "139/81");
}

#[test]
fn events_json_and_csv() {
    let out = run(&["events", "--alloc", "3,1,1", "--i", "2"]);
    assert!(out.status.success());
    let json = stdout_json(&out);
    assert_eq!(json["f"], "35/18");
    assert_eq!(json["f_shifted"], "25/18");
    assert_eq!(json["i"], 2);
    let rows = json["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);

    let out = run(&["events", "--alloc", "3,1,1", "--i", "2", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("class,j,a,b,probability,e_x,e_x_shifted"));
    assert_eq!(text.trim().lines().count(), 4);
}

#[test]
fn events_default_i_is_lowest_min_bin() {
    let with_default = run(&["events", "--alloc", "4,2,1"]);
    let explicit = run(&["events", "--alloc", "4,2,1", "--i", "3"]);
    assert!(with_default.status.success());
    assert_eq!(with_default.stdout, explicit.stdout);
}

#[test]
fn events_rejects_out_of_range_i() {
    let out = run(&["events", "--alloc", "3,1", "--i", "5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error: invalid index:"));
}

#[test]
fn simulate_is_deterministic() {
    let args = [
        "simulate",
        "--alloc",
        "4,2",
        "--weights",
        "5/6,1/6",
        "--trials",
        "20000",
        "--seed",
        "7",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let json = stdout_json(&a);
    assert_eq!(json["trials"], 20000);
    let hist = json["histogram_x"].as_object().unwrap();
    let total: u64 = hist.values().map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(total, 20000);
}

#[test]
fn simulate_histogram_csv() {
    let out = run(&[
        "simulate",
        "--alloc",
        "2,2",
        "--trials",
        "1000",
        "--seed",
        "1",
        "--hist",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.trim().lines();
    assert_eq!(lines.next(), Some("value,count"));
    let total: u64 = lines
        .map(|l| l.split(',').nth(1).unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 1000);
}

#[test]
fn simulate_compare_reports_agreement() {
    let out = run(&[
        "simulate",
        "--alloc",
        "3,2",
        "--trials",
        "20000",
        "--seed",
        "5",
        "--compare",
    ]);
    assert!(out.status.success());
    let json = stdout_json(&out);
    assert_eq!(json["agree"], true);
    assert!(json["z_mean"].as_f64().unwrap() <= 4.0);
}

#[test]
fn verify_small_sweeps_exit_zero() {
    for args in [
        vec!["verify", "--suite", "theorem1", "--n-max", "6", "--k-max", "3"],
        vec!["verify", "--suite", "lemma1", "--n-max", "10"],
        vec!["verify", "--suite", "closed-forms", "--a-max", "5"],
        vec!["verify", "--suite", "proof-chain", "--r-max", "6"],
        vec!["verify", "--suite", "events", "--total-max", "6", "--k-max", "3"],
    ] {
        let out = run(&args);
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stdout)
        );
        assert!(String::from_utf8_lossy(&out.stdout).contains("ok"));
    }
}

#[test]
fn scan_rejects_uniform_weights() {
    let out = run(&["scan", "--k", "2", "--weights", "1/2,1/2", "--n", "3..5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error: precondition violation:"));
}

#[test]
fn scan_emits_csv_rows() {
    let out = run(&["scan", "--k", "2", "--weights", "5/6,1/6", "--n", "6..6"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.trim().lines().collect();
    assert_eq!(lines.len(), 2);
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields[0], "6");
    assert_eq!(fields[1], "4|2");
    assert_eq!(fields[2], "139/81");
    assert_ne!(fields[1], "5|1");
}

#[test]
fn help_documents_defaults() {
    for verb in ["exact", "optimize", "events", "simulate", "verify", "scan"] {
        let out = run(&[verb, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{verb} --help");
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("--help"));
        if verb == "simulate" {
            assert!(text.contains("100000") || text.contains("100_000"));
        }
    }
}
