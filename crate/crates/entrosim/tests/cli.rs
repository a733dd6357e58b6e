//! End-to-end tests of the `entrosim` binary: exit codes, file outputs,
//! and the environment-variable output override.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::json;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_entrosim"));
    cmd.env_remove("ENTROSIM_OUTPUT_DIR");
    cmd
}

fn write_config(dir: &Path, value: serde_json::Value) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&value).unwrap()).unwrap();
    path
}

fn small_config(out_dir: &Path) -> serde_json::Value {
    json!({
        "model_name": "qubit_decay_homodyne",
        "trajectories": 20,
        "dt": 1e-3,
        "t_final": 0.05,
        "base_seed": 3,
        "window": 5,
        "output_dir": out_dir,
    })
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("process exited")
}

#[test]
fn run_writes_outputs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), small_config(&out));

    let output = bin()
        .args(["run", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(
        exit_code(&output),
        0,
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );

    let csv = std::fs::read_to_string(out.join("timeseries.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,mean_entropy,entropy_stderr,lhs_rate,rhs_mean,rhs_stderr,commutator_term,var_term,genvar_term,margin_sigmas,floored_fraction"
    );
    assert_eq!(lines.count(), 51); // steps + 1 rows

    let verdicts: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("verdicts.json")).unwrap()).unwrap();
    let verdicts = verdicts.as_array().unwrap();
    assert_eq!(verdicts.len(), 41); // indices 5..=45
    for v in verdicts {
        for key in [
            "time",
            "lhs_rate",
            "lhs_stderr",
            "rhs_mean",
            "rhs_stderr",
            "margin_sigmas",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }

    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["model_name"], "qubit_decay_homodyne");
    assert_eq!(summary["violation_count"], 0);
    assert!(
        summary.get("wall_time_seconds").is_none(),
        "wall time must stay out of summary.json"
    );

    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("min margin_sigmas"), "stdout: {stdout}");
}

#[test]
fn missing_config_file_is_a_config_error() {
    let output = bin()
        .args(["run", "--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 2);
    assert!(String::from_utf8_lossy(&output.stderr).contains("config"));
}

#[test]
fn zero_trajectories_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(&dir.path().join("out"));
    config["trajectories"] = json!(0);
    let path = write_config(dir.path(), config);
    let output = bin().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(exit_code(&output), 2);
    assert!(String::from_utf8_lossy(&output.stderr).contains("trajectories"));
}

#[test]
fn unknown_config_field_is_rejected_with_its_name() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(&dir.path().join("out"));
    config["tyops"] = json!(1);
    let path = write_config(dir.path(), config);
    let output = bin().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(exit_code(&output), 2);
    assert!(String::from_utf8_lossy(&output.stderr).contains("tyops"));
}

#[test]
fn trajectory_abort_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(&dir.path().join("out"));
    config["dt"] = json!(0.25);
    config["t_final"] = json!(1.0);
    config["base_seed"] = json!(0);
    config["window"] = json!(1);
    config["allow_coarse_dt"] = json!(true);
    let path = write_config(dir.path(), config);
    let output = bin().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(
        exit_code(&output),
        4,
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert!(String::from_utf8_lossy(&output.stderr).contains("negativity"));
}

#[test]
fn cli_overrides_take_effect() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), small_config(&out));
    let output = bin()
        .args(["run", "--config"])
        .arg(&config)
        .args(["--trajectories", "10", "--seed", "99"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0);
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["trajectories"], 10);
    assert_eq!(summary["config"]["base_seed"], 99);
}

#[test]
fn env_var_overrides_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let ignored = dir.path().join("ignored");
    let env_out = dir.path().join("env_out");
    let config = write_config(dir.path(), small_config(&ignored));
    let output = bin()
        .args(["run", "--config"])
        .arg(&config)
        .env("ENTROSIM_OUTPUT_DIR", &env_out)
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0);
    assert!(env_out.join("summary.json").exists());
    assert!(!ignored.exists());
}

#[test]
fn emit_subset_writes_only_requested_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut config = small_config(&out);
    config["emit"] = json!(["summary"]);
    let path = write_config(dir.path(), config);
    let output = bin().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(exit_code(&output), 0);
    assert!(out.join("summary.json").exists());
    assert!(!out.join("timeseries.csv").exists());
    assert!(!out.join("verdicts.json").exists());
}

#[test]
fn props_suite_passes_and_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let output = bin()
        .args([
            "props",
            "--dims",
            "2,3",
            "--samples",
            "150",
            "--seed",
            "5",
            "--output",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(
        exit_code(&output),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("ito identity residual"), "{stdout}");
    assert_eq!(stdout.matches("PASS").count(), 3, "{stdout}");

    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("props_summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["passed"], true);
    assert_eq!(summary["samples"], 150);
}

#[test]
fn props_rejects_bad_arguments() {
    let output = bin()
        .args(["props", "--dims", "2", "--samples", "0"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 2);

    let output = bin()
        .args(["props", "--dims", "7", "--samples", "200"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 2);

    let output = bin().args(["props", "--samples", "200"]).output().unwrap();
    assert_eq!(exit_code(&output), 2);
}
