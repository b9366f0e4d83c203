use std::path::Path;
use std::process::{Command, Output};

fn pdmp(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("cfg.json");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_pdmp"))
        .arg("run")
        .arg(&cfg)
        .args(args)
        .args(["--output_dir", dir.join("out").to_str().unwrap()])
        .env("PDMP_THREADS", "1")
        .output()
        .unwrap()
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("out/summary.json")).unwrap()).unwrap()
}

const M1: &str = r#"{"model": {"name": "drift_redistribute"}, "grid": {"cells": 100}, "seed": 3}"#;

#[test]
fn simulate_writes_density_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = pdmp(dir.path(), M1, &["simulate", "--paths", "2000", "--t", "0.5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/density.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x0,mode,value"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 100);
    let s = summary(dir.path());
    assert_eq!(s["subcommand"], "simulate");
    assert_eq!(s["seed"], 3);
    for key in ["model", "parameters", "masses", "residuals", "wall_time_seconds"] {
        assert!(s.get(key).is_some(), "summary lacks {key}");
    }
    assert_eq!(s["masses"]["censored"], 0.0);
}

#[test]
fn invariant_of_m1_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = pdmp(dir.path(), M1, &["invariant"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/density.csv")).unwrap();
    for row in csv.lines().skip(1) {
        let cols: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
        assert!((cols[2] - 2.0 * cols[0]).abs() < 1e-3, "{row}");
    }
}

#[test]
fn overrides_reach_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = pdmp(dir.path(), M1, &["evolve", "--t", "0.25", "--seed", "11", "--grid.cells", "40"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path());
    assert_eq!(s["seed"], 11);
    let rows = std::fs::read_to_string(dir.path().join("out/density.csv")).unwrap().lines().count();
    assert_eq!(rows, 41);
}

#[test]
fn failed_tolerance_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = pdmp(dir.path(), M1, &["invariant", "--tolerances.residual", "-1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = pdmp(dir.path(), r#"{"model": {"name": "no_such_model"}}"#, &["simulate"]);
    assert_eq!(unknown.status.code(), Some(1));
    let malformed = pdmp(dir.path(), "{ not json", &["simulate"]);
    assert_eq!(malformed.status.code(), Some(1));
    let dangling = pdmp(dir.path(), M1, &["simulate", "--t"]);
    assert_eq!(dangling.status.code(), Some(1));
    let bad_task = pdmp(dir.path(), M1, &["teleport"]);
    assert_eq!(bad_task.status.code(), Some(1));
}

#[test]
fn verify_on_one_model_reports_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = pdmp(dir.path(), r#"{"model": {"name": "constant_rate"}, "grid": {"cells": 100}, "seed": 1}"#, &["verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().all(|l| l.starts_with("PASS")), "{stdout}");
    assert!(summary(dir.path())["checks"].as_array().unwrap().len() >= 5);
}
