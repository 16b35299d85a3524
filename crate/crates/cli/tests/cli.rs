use std::path::Path;
use std::process::{Command, Output};

fn ringsched(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ringsched")).args(args).env("RINGSCHED_LOG", "error").output().unwrap()
}

fn small_run(out: &Path, policy: &str) -> Output {
    ringsched(&[
        "run", "--scenario", "utility", "--policy", policy, "--cluster", "gen:servers=4", "--trace", "gen:jobs=6",
        "--slots", "8", "--seed", "3", "--out", out.to_str().unwrap(),
    ])
}

#[test]
fn run_then_validate() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_run(dir.path(), "gadget,fifo");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("utility.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 4);
    assert!(csv.starts_with("policy,seed,"));

    let logs: Vec<_> = std::fs::read_dir(dir.path().join("runs")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(logs.len(), 8);
    let check = ringsched(&["validate", "--schedule", logs[0].to_str().unwrap()]);
    assert_eq!(check.status.code(), Some(0), "{}", String::from_utf8_lossy(&check.stdout));
}

#[test]
fn tampered_log_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(small_run(dir.path(), "las").status.code(), Some(0));
    let path = std::fs::read_dir(dir.path().join("runs")).unwrap().next().unwrap().unwrap().path();
    let mut log: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let obj = log["objective"].as_f64().unwrap();
    log["objective"] = (obj + 1.0).into();
    std::fs::write(&path, log.to_string()).unwrap();
    let check = ringsched(&["validate", "--schedule", path.to_str().unwrap(), "--no-replay"]);
    assert_eq!(check.status.code(), Some(2));
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(ringsched(&["run", "--scenario", "bogus", "--out", d]).status.code(), Some(1));
    assert_eq!(ringsched(&["run", "--scenario", "utility", "--policy", "sjf", "--out", d]).status.code(), Some(1));
    assert_eq!(ringsched(&["run", "--scenario", "approx", "--policy", "fifo", "--out", d]).status.code(), Some(1));
    assert_eq!(ringsched(&["run", "--scenario", "utility", "--epsilon", "-1", "--out", d]).status.code(), Some(1));
    assert_eq!(ringsched(&["validate", "--schedule", "/nonexistent.json"]).status.code(), Some(1));
}

#[test]
fn approx_reports_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let out = ringsched(&["run", "--scenario", "approx", "--trials", "2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("approx: "));
    let csv = std::fs::read_to_string(dir.path().join("approx.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("seed,slot,gadget_utility,oracle_utility,ratio"));
}
