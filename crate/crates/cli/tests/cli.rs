use std::fs;
use std::process::{Command, Output};

use iflow_core::field_io::{read_vector, write_field, write_vector, Field};
use iflow_core::grid::{demo_initial_velocity, GridSpec, ScalarField};
use iflow_core::ops::{divergence, gradient};
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_iflow");

fn iflow(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("IFLOW_OUT_DIR")
        .output()
        .unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn check_identities_passes() {
    let out = iflow(&["check-identities", "--trials", "200", "--seed", "9"]);
    assert!(out.status.success());
    let report = stdout_json(&out);
    assert_eq!(report["trials"], 200);
    assert_eq!(report["items"].as_array().unwrap().len(), 3);
    assert_eq!(report["pass"], true);
}

#[test]
fn project_annihilates_a_gradient_field() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = GridSpec::<f64>::standard();
    let psi = ScalarField::from_index_fn(spec, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
    let input = tmp.path().join("grad.iflow");
    write_vector(&gradient(&psi), &input).unwrap();
    let output = tmp.path().join("out.iflow");
    let out = iflow(&[
        "project",
        input.to_str().unwrap(),
        "--out",
        output.to_str().unwrap(),
        "--csv",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let projected = read_vector::<f64>(&output).unwrap();
    assert!(projected.max_abs() <= 1e-8);
    assert!(output.with_extension("csv").is_file());
    assert!(stdout_json(&out)["output_max_abs"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn project_default_output_path_and_spectral_method() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("ic.iflow");
    write_vector(&demo_initial_velocity(GridSpec::<f64>::standard()), &input).unwrap();
    let out = iflow(&["project", input.to_str().unwrap(), "--method", "spectral"]);
    assert!(out.status.success());
    let projected = read_vector::<f64>(&tmp.path().join("ic.projected.iflow")).unwrap();
    assert!(divergence(&projected).max_abs() <= 1e-8);
}

#[test]
fn project_rejects_scalar_and_garbage_files() {
    let tmp = tempfile::tempdir().unwrap();
    let scalar = tmp.path().join("s.iflow");
    write_field(
        &Field::Scalar(ScalarField::constant(GridSpec::<f64>::standard(), 1.0)),
        &scalar,
    )
    .unwrap();
    assert_eq!(
        iflow(&["project", scalar.to_str().unwrap()]).status.code(),
        Some(2)
    );
    let junk = tmp.path().join("junk.iflow");
    fs::write(&junk, b"not a field\n").unwrap();
    let out = iflow(&["project", junk.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "format");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(iflow(&[]).status.code(), Some(2));
    assert_eq!(iflow(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        iflow(&["check-identities", "--trials", "many"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(iflow(&["run"]).status.code(), Some(2));
}

#[test]
fn run_rejects_bad_configs_with_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"time": {"dt": -1}}"#).unwrap();
    let out = iflow(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["message"].as_str().unwrap().contains("time.dt"));

    fs::write(&cfg, "{").unwrap();
    assert_eq!(
        iflow(&["run", cfg.to_str().unwrap()]).status.code(),
        Some(2)
    );
    let missing = tmp.path().join("nope.json");
    assert_eq!(
        iflow(&["run", missing.to_str().unwrap()]).status.code(),
        Some(2)
    );
}

#[test]
fn run_honours_output_directory_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    let configured = tmp.path().join("configured");
    let overridden = tmp.path().join("overridden");
    let doc = serde_json::json!({
        "time": {"steps": 2},
        "output": {"directory": configured},
    });
    fs::write(&cfg, doc.to_string()).unwrap();
    let out = Command::new(BIN)
        .args(["run", cfg.to_str().unwrap()])
        .env("IFLOW_OUT_DIR", &overridden)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(overridden.join("summary.json").is_file());
    assert!(!configured.exists());
}

#[test]
fn demo_paper_at_end_reports_divergence_with_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("demo");
    let out = iflow(&["demo-paper", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.join("error.json")).unwrap()).unwrap();
    assert_eq!(report["error"], "diverged-state");
    assert!(dir.join("divergence_t0.pgm").is_file());
    assert!(dir.join("velocity_00000.iflow").is_file());
}

#[test]
fn demo_paper_per_step_completes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("demo");
    let out = iflow(&[
        "demo-paper",
        "--out",
        dir.to_str().unwrap(),
        "--projection",
        "per-step",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = stdout_json(&out);
    assert_eq!(summary["steps_completed"], 140);
    assert!(summary["final"]["divergence_max"].as_f64().unwrap() <= 1e-8);
    let e = &summary["annulus_energy"];
    assert!(e["final"].as_f64().unwrap() > e["initial"].as_f64().unwrap());
    assert!(dir.join("divergence_final.pgm").is_file());
}
