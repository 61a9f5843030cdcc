//! Black-box tests of the `bribemine` binary: exit codes, determinism,
//! CSV round-trips, and configuration handling.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bribemine"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn bribemine")
}

#[test]
fn invalid_alpha_exits_with_config_code() {
    let out = run(&["analyze", "--alpha", "0.6", "--beta", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("alpha"), "stderr should name the bound: {err}");
    assert!(err.contains("0.5"), "stderr should name the bound: {err}");
}

#[test]
fn boundary_alpha_half_rejected() {
    let out = run(&["analyze", "--alpha", "0.5", "--beta", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_subcommand_is_usage_error() {
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_same_seed_is_byte_identical() {
    let args = [
        "simulate",
        "--alpha",
        "0.3",
        "--rho",
        "0.1",
        "--gamma",
        "0.5",
        "--epsilon",
        "0.02",
        "--beta",
        "0.1",
        "--model",
        "bssm",
        "--rounds",
        "200000",
        "--seed",
        "99",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn sweep_csv_round_trips_and_is_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.csv");
    let out = run(&[
        "sweep",
        "--beta",
        "0.1",
        "--rho",
        "0.1",
        "--epsilon",
        "0.02",
        "--model",
        "bssm",
        "--sweep",
        "alpha=0.1:0.4:4",
        "--sweep",
        "gamma=0:1:3",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[0], "alpha");
    assert_eq!(header[1], "gamma");
    let rows: Vec<Vec<f64>> = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 12, "row count = product of axis sizes");
    // Lexicographic by axes.
    for w in rows.windows(2) {
        let key = |r: &Vec<f64>| (r[0], r[1]);
        assert!(key(&w[0]) <= key(&w[1]));
    }
    // Round trip: re-render the parsed numbers and compare byte-for-byte.
    let mut rebuilt = String::new();
    rebuilt.push_str(&header.join(","));
    rebuilt.push('\n');
    for row in &rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        rebuilt.push_str(&cells.join(","));
        rebuilt.push('\n');
    }
    assert_eq!(text, rebuilt, "shortest round-trip float formatting");
}

#[test]
fn sweep_over_fixed_parameter_is_config_error() {
    let out = run(&[
        "sweep",
        "--alpha",
        "0.3",
        "--beta",
        "0.1",
        "--sweep",
        "alpha=0.1:0.4:4",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fixed"));
}

#[test]
fn single_point_sweep_has_one_row() {
    let out = run(&[
        "sweep",
        "--beta",
        "0.1",
        "--model",
        "bsm",
        "--sweep",
        "alpha=0.3:0.3:1",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| !l.is_empty()).count(), 2); // header + 1 row
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        r#"
[params]
alpha = 0.3
rho = 0.1
gamma = 0.5
epsilon = 0.02
betas = [0.1]

[analyze]
model = "bssm"
method = "exact"
"#,
    )
    .unwrap();
    let from_file = run(&["analyze", "--config", cfg.to_str().unwrap()]);
    assert!(from_file.status.success());
    let text = String::from_utf8_lossy(&from_file.stdout);
    assert!(text.contains("alpha=0.3"));

    // A flag overrides the file value.
    let overridden = run(&[
        "analyze",
        "--config",
        cfg.to_str().unwrap(),
        "--alpha",
        "0.25",
    ]);
    assert!(overridden.status.success());
    let text = String::from_utf8_lossy(&overridden.stdout);
    assert!(text.contains("alpha=0.25"));
}

#[test]
fn unknown_config_key_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[params]\nalfa = 0.3\n").unwrap();
    let out = run(&["analyze", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn trace_file_has_schema_lines() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.log");
    let out = run(&[
        "simulate",
        "--alpha",
        "0.3",
        "--beta",
        "0.1",
        "--epsilon",
        "0.02",
        "--model",
        "bsm",
        "--rounds",
        "2000",
        "--seed",
        "1",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&trace).unwrap();
    let first = text.lines().next().unwrap();
    assert!(first.starts_with("event=0 finder="));
    assert!(first.contains("action="));
    assert!(first.contains("before="));
    assert!(first.contains("after="));
    assert_eq!(text.lines().count(), 2000);
}

#[test]
fn dilemma_single_target_marks_accept_dominant() {
    let out = run(&[
        "dilemma",
        "--alpha",
        "0.3",
        "--rho",
        "0.1",
        "--gamma",
        "0.5",
        "--epsilon",
        "0.02",
        "--beta",
        "0.1",
        "--model",
        "bssm",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("accept") || l.starts_with("deny")).count(), 2);
    assert!(text.contains("pure nash equilibria: accept"));
}

#[test]
fn growth_prints_identity(){
    let out = run(&["growth", "--alpha", "0.3", "--rho", "0.1"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("gr_sm   = 0.7"));
    assert!(text.contains("gr_bssm = 0.73"));
}

#[test]
fn simulate_writes_csv_when_asked() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stats.csv");
    let out = run(&[
        "simulate",
        "--alpha",
        "0.3",
        "--beta",
        "0.1",
        "--epsilon",
        "0.02",
        "--model",
        "bsm",
        "--rounds",
        "100000",
        "--seed",
        "5",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.contains("settled_adversary"));
    assert!(header.contains("reward_target1"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn out_path_in_missing_directory_is_config_error() {
    let missing = Path::new("/nonexistent-dir-for-test/x.csv");
    let out = run(&[
        "growth",
        "--alpha",
        "0.3",
        "--out",
        missing.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
