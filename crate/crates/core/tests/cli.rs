//! End-to-end runs of the `bps` binary on the enumerative backend.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bps"))
        .args(args)
        .env_remove("BPS_HORIZON")
        .output()
        .expect("binary runs")
}

fn bps_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bps"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn export_pickup(dir: &Path) -> (String, String) {
    let (model, objective) = (dir.join("model.json"), dir.join("objective.json"));
    let out = bps(&[
        "export",
        "--domain",
        "pickup",
        "--out-model",
        p(&model),
        "--out-objective",
        p(&objective),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (p(&model).to_string(), p(&objective).to_string())
}

#[test]
fn export_synth_validate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (model, objective) = export_pickup(dir.path());
    let policy = dir.path().join("policy.json");
    let dot = dir.path().join("policy.dot");
    let out = bps(&[
        "synth",
        "--model",
        &model,
        "--objective",
        &objective,
        "--horizon",
        "3",
        "--backend",
        "enum",
        "--out-policy",
        p(&policy),
        "--out-dot",
        p(&dot),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("root action: a_R"));

    let tree: Value = serde_json::from_str(&fs::read_to_string(&policy).unwrap()).unwrap();
    assert_eq!(tree["action"], "a_R");
    assert!(fs::read_to_string(&dot).unwrap().starts_with("digraph"));

    let out = bps(&[
        "validate",
        "--model",
        &model,
        "--objective",
        &objective,
        "--policy",
        p(&policy),
        "--horizon",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn tampered_policy_is_rejected_with_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let (model, objective) = export_pickup(dir.path());
    let policy = dir.path().join("policy.json");
    let out = bps(&[
        "synth",
        "--model",
        &model,
        "--objective",
        &objective,
        "--horizon",
        "3",
        "--backend",
        "enum",
        "--out-policy",
        p(&policy),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&policy).unwrap().replacen("\"a_R\"", "\"a_L\"", 1);
    fs::write(&policy, text).unwrap();
    let cex = dir.path().join("cex.json");
    let out = bps(&[
        "validate",
        "--model",
        &model,
        "--objective",
        &objective,
        "--policy",
        p(&policy),
        "--horizon",
        "3",
        "--out-counterexample",
        p(&cex),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let cex: Value = serde_json::from_str(&fs::read_to_string(&cex).unwrap()).unwrap();
    assert!(cex["kind"].is_string());
}

#[test]
fn no_policy_within_bound_exits_two() {
    let out = bps(&["synth", "--domain", "pickup", "--horizon", "0", "--backend", "enum"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("NoPolicyWithinBound"));
}

#[test]
fn environment_overrides_flags() {
    let out = bps_env(
        &["synth", "--domain", "pickup"],
        &[("BPS_HORIZON", "0"), ("BPS_BACKEND", "enum")],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_model_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let (_, objective) = export_pickup(dir.path());
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\n  \"states\": [\"a\",\n}").unwrap();
    let out = bps(&[
        "synth",
        "--model",
        p(&bad),
        "--objective",
        &objective,
        "--backend",
        "enum",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json") && err.contains("line 3"), "{err}");
}

#[test]
fn missing_policy_file_is_an_error() {
    let out = bps(&["validate", "--domain", "pickup", "--policy", "/nonexistent/policy.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_reports_frequencies() {
    let dir = tempfile::tempdir().unwrap();
    let policy = dir.path().join("policy.json");
    let out = bps(&[
        "synth",
        "--domain",
        "pickup",
        "--horizon",
        "3",
        "--backend",
        "enum",
        "--out-policy",
        p(&policy),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let out = bps(&[
        "simulate",
        "--domain",
        "pickup",
        "--policy",
        p(&policy),
        "--episodes",
        "2000",
        "--seed",
        "3",
        "--traces",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["episodes"], 2000);
    assert_eq!(report["traces"].as_array().unwrap().len(), 2);
    let goal = report["goal_freq"].as_f64().unwrap();
    assert!((0.8..0.9).contains(&goal), "{goal}");
}

#[test]
fn bench_writes_stats_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("stats.csv");
    let out = bps(&[
        "bench",
        "--sweep-m",
        "1",
        "--sweep-h",
        "2,3",
        "--backend",
        "enum",
        "--width",
        "2",
        "--height",
        "2",
        "--shadow",
        "1,0",
        "--storage",
        "1,1",
        "--p-fail",
        "0",
        "--p-fp",
        "0",
        "--p-fn",
        "0",
        "--stats-out",
        p(&csv),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("domain,M,N,h,backend"));
    assert_eq!(lines.len(), 3);
    assert!(lines[2].contains("Valid"));
}
