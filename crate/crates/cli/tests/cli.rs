use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use basketopt_cli::{parse_str, RunConfig};

fn basketopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_basketopt")).args(args).output().unwrap()
}

fn out_dir(dir: &Path) -> &str {
    dir.to_str().unwrap()
}

fn envelope(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn oc_table_shape() {
    let dir = tempfile::tempdir().unwrap();
    let o = basketopt(&["oc", "--set", "1", "--scenario", "b", "--phi", "0.99,2,0", "--out-dir", out_dir(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("oc.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "scenario,stratum,reject_prob,fwer,ewp,ecd");
    assert_eq!(lines.len(), 5);
    assert!(lines[4].starts_with("b,all,,"));
    let meta = envelope(&dir.path().join("oc.json"));
    assert_eq!(meta["command"], "oc");
    assert_eq!(meta["result"][0]["scenario"], "b");
}

#[test]
fn config_echo_reparses_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"set": "1", "phi": [0.99, 2, 0]}"#).unwrap();
    let o = basketopt(&["oc", "--config", cfg.to_str().unwrap(), "--out-dir", out_dir(dir.path())]);
    assert!(o.status.success());
    let meta = envelope(&dir.path().join("oc.json"));
    let params = &meta["config"]["params"];
    assert_eq!(params["xi1"], 1.0);
    assert_eq!(params["xi2"], 1.0);
    assert_eq!(params["xi3"], 1000.0);
    assert_eq!(params["eta1"], 0.05);
    assert_eq!(params["eta2"], 0.1);
    assert_eq!(params["eta3"], 0.2);
    let echoed: RunConfig = parse_str(&meta["config"].to_string()).unwrap();
    let mut expected = parse_str(r#"{"set": "1", "phi": [0.99, 2, 0]}"#).unwrap();
    expected.out_dir = dir.path().to_path_buf();
    assert_eq!(echoed, expected);
}

#[test]
fn bad_tau_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"phi": [0.99, 2, 1.5]}"#).unwrap();
    let o = basketopt(&["oc", "--config", cfg.to_str().unwrap(), "--out-dir", out_dir(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("`phi`") && err.contains("tau"), "{err}");

    let o = basketopt(&["oc", "--phi", "0.9,-1,0", "--out-dir", out_dir(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_key_exits_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"optimizer": {"algorithm": {"kind": "de"}, "budgte": 10}}"#).unwrap();
    let o = basketopt(&["oc", "--config", cfg.to_str().unwrap(), "--out-dir", out_dir(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("optimizer") && err.contains("budgte"), "{err}");
}

#[test]
fn exact_on_large_set_exits_with_ceiling_guidance() {
    let dir = tempfile::tempdir().unwrap();
    let o = basketopt(&["oc", "--set", "3", "--backend", "exact", "--out-dir", out_dir(dir.path())]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--backend mc"));
    let o = basketopt(&["oc", "--set", "3", "--scenario", "e", "--backend", "mc", "--n-mc", "100", "--out-dir", out_dir(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(envelope(&dir.path().join("oc.json"))["seeds"]["mc_base_seed"], 1856);
}

#[test]
fn boundary_default_schema() {
    let dir = tempfile::tempdir().unwrap();
    let o = basketopt(&["boundary", "--out-dir", out_dir(dir.path())]);
    assert!(o.status.success());
    let text = fs::read_to_string(dir.path().join("boundary.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "strata,n,tau,epsilon_extreme,epsilon_cap");
    assert_eq!(text.lines().count(), 1 + 7 * 99);
}

#[test]
fn toer_curve_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"toer_curve": {"n": 10, "phis": [[0.99, 1, 0]], "p2_grid": [0.2, 0.6]}}"#).unwrap();
    let o = basketopt(&["toer-curve", "--config", cfg.to_str().unwrap(), "--out-dir", out_dir(dir.path())]);
    assert!(o.status.success());
    let text = fs::read_to_string(dir.path().join("toer_curve.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn optimize_writes_result_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"optimizer": {"algorithm": {"kind": "sa_bounded", "t_start": 1}}}"#).unwrap();
    let o = basketopt(&["optimize", "--config", cfg.to_str().unwrap(), "--budget", "25", "--seed", "3", "--out-dir", out_dir(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let meta = envelope(&dir.path().join("optimize.json"));
    assert_eq!(meta["result"]["n_steps"], 25);
    assert_eq!(meta["seeds"]["optimizer"], 3);
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "eval_index,lambda,epsilon,tau,utility,accepted");
    assert_eq!(trace.lines().count(), 26);
}

#[test]
fn benchmark_and_study_small_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{
            "benchmark": {
                "set_id": "1",
                "algorithms": [{"kind": "sa_bounded", "t_start": 1}, {"kind": "cobyla"}],
                "n_runs": 2,
                "budget": 20,
                "backend": {"kind": "monte_carlo", "n_mc": 50, "base_seed": 5}
            },
            "study": {"set_ids": ["1"], "optimize": false}
        }"#,
    )
    .unwrap();
    let o = basketopt(&["benchmark", "--config", cfg.to_str().unwrap(), "--out-dir", out_dir(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("benchmark_runs.csv").exists());
    assert_eq!(fs::read_dir(dir.path().join("traces")).unwrap().count(), 2 * (2 + 1));
    let o = basketopt(&["study", "--config", cfg.to_str().unwrap(), "--out-dir", out_dir(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = fs::read_to_string(dir.path().join("study_rows.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 2 * 4);
}

#[test]
fn output_is_stable_across_worker_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, w) in [(&a, "1"), (&b, "3")] {
        let o = basketopt(&["oc", "--set", "2", "--phi", "0.9,1,0.2", "--workers", w, "--out-dir", out_dir(dir.path())]);
        assert!(o.status.success());
    }
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("oc.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}
