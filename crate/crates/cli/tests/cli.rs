use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use psrlab::TabularPomdp;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn psrlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psrlab")).args(args).output().unwrap()
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn gen_env_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert!(psrlab(&["gen-env", "--out", out]).status.success());
    let text = std::fs::read_to_string(dir.path().join("env.json")).unwrap();
    let env = TabularPomdp::from_json(&text).unwrap();
    assert_eq!(env, psrlab::pomdp::reference_instance());
}

#[test]
fn online_outputs_have_fixed_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("online_end_to_end.json");
    let out = psrlab(&["run-online", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--seeds", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(header(&dir.path().join("seed-1/logs.csv")), "k,ucb_value,feasible_size,candidate_id");
    assert_eq!(
        header(&dir.path().join("runs.csv")),
        "seed,terminated,iterations,gap,max_tv,p_min,beta,lambda,alpha,c_theory"
    );
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("seed-0/summary.json")).unwrap()).unwrap();
    for key in ["terminated", "iterations", "gap", "max_tv", "seed", "params"] {
        assert!(summary.get(key).is_some(), "missing {key}");
    }
    assert!(dir.path().join("seed-0/model.json").exists());
    assert!(dir.path().join("seed-0/policy.json").exists());
}

#[test]
fn sweep_rows_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = config("offline_trend.json");
    let run = psrlab(&["sweep-offline", "--config", cfg.to_str().unwrap(), "--out", out, "--k-list", "250,1000", "--seeds", "2"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(csv.starts_with("K,seed,gap,lcb_value,iota,c_infinity,"));
    assert_eq!(csv.lines().count(), 5);
    assert!(dir.path().join("K1000/seed-1/model.json").exists());
    assert!(dir.path().join("K1000/seed-1/policy.json").exists());
    assert!(psrlab(&["report", "--out", out]).status.success());
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn verify_exit_status_follows_the_report() {
    assert!(psrlab(&["verify", "--suite", "lemmas", "--seeds", "5"]).status.success());
    let weak = psrlab(&["verify", "--suite", "ucb-validity", "--seeds", "10", "--c-theory", "0.0001"]);
    assert_eq!(weak.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&weak.stdout).contains("FAIL"));
}

#[test]
fn bad_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"mode":"online","environment":{"kind":"reference"},"seeds":[]}"#).unwrap();
    let out = psrlab(&["run-online", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
