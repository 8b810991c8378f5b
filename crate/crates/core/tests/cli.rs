//! The `balflow` binary end to end: files written, exit codes, resume rules.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn balflow(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_balflow"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("BALFLOW_OUT")
        .output()
        .expect("spawn balflow")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn lambda(snapshot: &Value) -> Vec<f64> {
    snapshot["lambda"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect()
}

fn ln_factorial(i: usize) -> f64 {
    (1..=i).map(|k| (k as f64).ln()).sum()
}

#[test]
fn zero_beta_solve_returns_reference() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ref");
    let o = balflow(&out, &["solve", "beta=0", "N=12"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let snap = read_json(&out.join("snapshot.json"));
    assert_eq!(snap["schema"], "balflow.snapshot/1");
    assert_eq!(snap["status"], "converged");
    assert_eq!(snap["t_final"], 0.0);
    let lam = lambda(&snap);
    assert_eq!(lam.len(), 13);
    for (i, v) in lam.iter().enumerate() {
        assert!((v + ln_factorial(i)).abs() < 1e-12, "lambda_{i} = {v}");
    }
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["command"], "solve");
    assert_eq!(manifest["config_digest"], snap["config_digest"]);
}

#[test]
fn solve_verify_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("base");
    assert_eq!(balflow(&base, &["solve", "beta=0.3", "N=16"]).status.code(), Some(0));
    for file in ["trajectory.tsv", "energy.dat", "residual_linf.dat", "lambda_final.dat"] {
        assert!(base.join(file).exists(), "{file} missing");
    }
    let header = std::fs::read_to_string(base.join("trajectory.tsv")).unwrap();
    let header = header.lines().next().unwrap();
    assert!(header.starts_with("t\tE\tE_s\tlinf_F\tl2_drift\tlambda_0"));
    assert!(header.ends_with("lambda_8"));

    let o = balflow(&base, &["verify", "beta=0.3", "N=16"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let balance = read_json(&base.join("balance.json"));
    assert_eq!(balance["passes"], true);
    assert_eq!(balance["report"]["points"].as_array().unwrap().len(), 5);
    assert!(base.join("balance.tsv").exists());
    let strict = dir.path().join("strict");
    let snap_arg = format!("snapshot={}", base.join("snapshot.json").display());
    let o = balflow(&strict, &["verify", &snap_arg, "threshold=1e-12"]);
    assert_eq!(o.status.code(), Some(3));

    // Same configuration: nothing left to do.
    let resume = format!("resume={}", base.join("snapshot.json").display());
    let again = dir.path().join("again");
    assert_eq!(balflow(&again, &["solve", "beta=0.3", "N=16", &resume]).status.code(), Some(0));
    let snap = read_json(&again.join("snapshot.json"));
    assert_eq!(snap["t_final"], 0.0);
    assert_eq!(lambda(&snap), lambda(&read_json(&base.join("snapshot.json"))));

    // New beta: the residual starts at the beta gap.
    let next = dir.path().join("next");
    assert_eq!(balflow(&next, &["solve", "beta=0.4", "N=16", &resume]).status.code(), Some(0));
    let traj = std::fs::read_to_string(next.join("trajectory.tsv")).unwrap();
    let first: Vec<f64> = traj.lines().nth(1).unwrap().split('\t').map(|c| c.parse().unwrap()).collect();
    assert_eq!(first[0], 0.0);
    assert!((first[3] - 0.1).abs() < 1e-5, "initial |F|inf = {}", first[3]);

    // A snapshot wider than the configuration is refused.
    let narrow = dir.path().join("narrow");
    let o = balflow(&narrow, &["solve", "beta=0.3", "N=12", &resume]);
    assert_eq!(o.status.code(), Some(2));
    let err = read_json(&narrow.join("error.json"));
    assert_eq!(err["kind"], "validation");
    assert!(err["message"].as_str().unwrap().contains("N = 16"));
}

#[test]
fn widened_resume_keeps_snapshot_head() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("base");
    assert_eq!(balflow(&base, &["solve", "beta=0.2", "N=12"]).status.code(), Some(0));
    let head = lambda(&read_json(&base.join("snapshot.json")));
    let resume = format!("resume={}", base.join("snapshot.json").display());
    let wide = dir.path().join("wide");
    let o = balflow(&wide, &["solve", "beta=0.2", "N=18", "M=6", "t_max=0.001", &resume]);
    assert_eq!(o.status.code(), Some(3));
    let traj = std::fs::read_to_string(wide.join("trajectory.tsv")).unwrap();
    let first: Vec<f64> = traj.lines().nth(1).unwrap().split('\t').map(|c| c.parse().unwrap()).collect();
    for i in 0..=6 {
        assert_eq!(first[5 + i], head[i], "lambda_{i}");
    }
}

#[test]
fn sweep_writes_distances() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let o = balflow(&out, &["sweep-s", "beta=0.3", "N=16", "horizon=1", "grid_intervals=4"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for k in 0..3 {
        assert!(out.join(format!("trajectory_s{k}.tsv")).exists());
    }
    let cauchy = std::fs::read_to_string(out.join("cauchy.tsv")).unwrap();
    let rows: Vec<Vec<f64>> = cauchy
        .lines()
        .skip(1)
        .map(|l| l.split('\t').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0][0], rows[0][1]), (0.9, 0.99));
    assert!(rows[1][2] < rows[0][2]);
    assert!(out.join("sweep.json").exists());
}

#[test]
fn diagnose_and_continue() {
    let dir = tempfile::tempdir().unwrap();
    let diag = dir.path().join("diag");
    let o = balflow(&diag, &["diagnose", "beta=0.3", "N=16", "probes=20"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&diag.join("diagnostics.json"));
    assert_eq!(report["probes"]["monotone_u"]["probes"], 20);
    assert_eq!(report["bounds"]["lambda2_ok"], true);

    // At this order the final balance misses the default threshold, so the
    // run reports a numerical failure but keeps every stage.
    let cont = dir.path().join("cont");
    let o = balflow(&cont, &["continue-beta", "beta=0.6", "N=16"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(cont.join("stage_00.json").exists() && cont.join("stage_01.json").exists());
    assert!(cont.join("continuation.json").exists());
    assert_eq!(read_json(&cont.join("snapshot.json"))["beta"], 0.6);
}

#[test]
fn invalid_input_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    for (name, args) in [
        ("beta", &["solve", "beta=1.2"][..]),
        ("unknown", &["solve", "beta=0.3", "wobble=1"][..]),
        ("missing", &["solve", "N=12"][..]),
    ] {
        let out = dir.path().join(name);
        let o = balflow(&out, args);
        assert_eq!(o.status.code(), Some(2), "{name}");
        let err: Value = serde_json::from_slice(&o.stderr).expect("stderr is one JSON record");
        assert_eq!(err["exit_code"], 2);
        assert_eq!(read_json(&out.join("error.json")), err);
        assert!(out.join("manifest.json").exists());
    }
}

#[test]
fn time_out_exits_with_numerical_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("short");
    let o = balflow(&out, &["solve", "beta=0.3", "N=16", "t_max=1"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(read_json(&out.join("error.json"))["kind"], "numerical");
    assert_eq!(read_json(&out.join("snapshot.json"))["status"], "time_out");
}

#[test]
fn config_file_and_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# fixture\nbeta = 0\nN = 10\n").unwrap();
    let env_out = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_balflow"))
        .args(["solve", "--config", cfg.to_str().unwrap(), "N=14", "svg=true"])
        .env("BALFLOW_OUT", &env_out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let snap = read_json(&env_out.join("snapshot.json"));
    assert_eq!(snap["N"], 14);
    assert!(env_out.join("energy.svg").exists());
}
