//! End-to-end tests of the ttquad binary: exit codes, output files, and
//! the JSON/CSV contract of every subcommand.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_ttquad");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn run_env(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary should spawn")
}

fn json_file(path: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()));
    serde_json::from_str(&text).expect("summary should be valid JSON")
}

fn fixture_lattice() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures/lattice_d32_n65536.txt")
        .canonicalize()
        .expect("fixture lattice should exist")
}

#[test]
fn integrate_writes_summary_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "integrate",
        "--problem",
        "exp-mean",
        "--d",
        "4",
        "--n",
        "9",
        "--tol",
        "1e-10",
        "--out",
        dir.path().to_str().unwrap(),
        "--tag",
        "smoke",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let summary = json_file(&dir.path().join("smoke.json"));
    assert_eq!(summary["converged"], serde_json::Value::Bool(true));
    let estimate = summary["estimate"].as_f64().unwrap();
    assert!((estimate - 1.0).abs() < 1e-9, "exp-mean is normalized to 1, got {estimate}");
    assert_eq!(summary["exponent_offset"].as_f64().unwrap(), 0.0);
    assert!(summary["n_eval"].as_u64().unwrap() > 0);
    assert!(summary["core_hours"].as_f64().unwrap() > 0.0);
    let csv = std::fs::read_to_string(dir.path().join("smoke.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(
        header,
        "sweep,max_rank,n_eval,estimate,exponent_offset,internal_rel_change,wall_s"
    );
    assert!(csv.lines().count() >= 2, "at least one sweep record");
}

#[test]
fn integrate_budget_exhaustion_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "integrate",
        "--problem",
        "ising-c",
        "--d",
        "8",
        "--n",
        "17",
        "--tol",
        "1e-14",
        "--max-sweeps",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
        "--tag",
        "budget",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let summary = json_file(&dir.path().join("budget.json"));
    assert_eq!(summary["converged"], serde_json::Value::Bool(false));
    let warnings = summary["warnings"].as_array().unwrap();
    assert!(!warnings.is_empty());
}

#[test]
fn invalid_problem_dimension_exits_one() {
    let out = run(&["integrate", "--problem", "ising-d", "--d", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn usage_error_exits_two() {
    let out = run(&["integrate", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_lattice_file_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "baseline-qmc",
        "--problem",
        "ising-c",
        "--d",
        "4",
        "--lattice",
        "/nonexistent/lattice.txt",
        "--n-from",
        "64",
        "--n-to",
        "128",
        "--reps",
        "4",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn out_dir_env_var_is_the_default_destination() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_env(
        &[
            "integrate",
            "--problem",
            "exp-mean",
            "--d",
            "3",
            "--n",
            "9",
            "--tag",
            "envdir",
        ],
        &[("TTQUAD_OUT_DIR", dir.path().to_str().unwrap())],
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("envdir.json").exists());
    assert!(dir.path().join("envdir.csv").exists());
}

#[test]
fn baseline_mc_ladder_and_slope() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "baseline-mc",
        "--problem",
        "exp-mean",
        "--d",
        "3",
        "--n-from",
        "256",
        "--n-to",
        "4096",
        "--reps",
        "8",
        "--seed",
        "11",
        "--out",
        dir.path().to_str().unwrap(),
        "--tag",
        "mc",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("mc.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "method,n_eval,mean,rel_std,wall_s");
    let rungs: Vec<&str> = lines.collect();
    assert_eq!(rungs.len(), 5, "256..4096 doubling gives five rungs");
    assert!(rungs.iter().all(|l| l.starts_with("mc,")));
    let summary = json_file(&dir.path().join("mc.json"));
    let slope = summary["slope"].as_f64().unwrap();
    assert!(slope < 0.0, "error should shrink with N, slope {slope}");
}

#[test]
fn baseline_qmc_with_fixture_lattice() {
    let dir = tempfile::tempdir().unwrap();
    let lattice = fixture_lattice();
    let out = run(&[
        "baseline-qmc",
        "--problem",
        "ising-c",
        "--d",
        "8",
        "--lattice",
        lattice.to_str().unwrap(),
        "--n-from",
        "256",
        "--n-to",
        "4096",
        "--reps",
        "8",
        "--seed",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
        "--tag",
        "qmc",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("qmc.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.starts_with("qmc,")));
    let summary = json_file(&dir.path().join("qmc.json"));
    assert!(summary["slope"].as_f64().unwrap() < 0.0);
}

#[test]
fn baseline_rejects_log_scaled_problems() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "baseline-mc",
        "--problem",
        "ising-d",
        "--d",
        "128",
        "--n-from",
        "256",
        "--n-to",
        "512",
        "--reps",
        "4",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn delta_flow_on_two_stored_results() {
    let dir = tempfile::tempdir().unwrap();
    for (tag, d) in [("a", "8"), ("b", "16")] {
        let out = run(&[
            "integrate",
            "--problem",
            "ising-d",
            "--d",
            d,
            "--n",
            "17",
            "--tol",
            "1e-7",
            "--out",
            dir.path().to_str().unwrap(),
            "--tag",
            tag,
        ]);
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let out = run(&["delta", "--a", a.to_str().unwrap(), "--b", b.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let delta = v["delta"].as_f64().unwrap();
    assert!(delta > 1.0 && delta < 10.0, "delta {delta}");
}

#[test]
fn selftest_passes() {
    let out = run(&["selftest"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.matches("[PASS]").count(), 3, "output: {text}");
    assert!(!text.contains("[FAIL]"));
}
