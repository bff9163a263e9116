//! End-to-end tests of the `fixedpoint` binary: exit codes, file outputs,
//! determinism, and the documented subcommand surface.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fixedpoint"))
}

fn write_two_halfspace_spec(path: &Path) {
    let spec = r#"{
  "dimension": 2,
  "sequence": {
    "kind": "constant",
    "operator": {
      "type": "convex_combo",
      "weights": [0.5, 0.5],
      "ops": [
        {"type": "project", "set": {"type": "halfspace", "a": [1.0, 0.0], "b": 0.0}},
        {"type": "project", "set": {"type": "halfspace", "a": [0.0, 1.0], "b": 0.0}}
      ]
    }
  },
  "alpha": {"family": "power", "c": 1.0, "p": 1.0, "offset": 0.0},
  "anchor": [1.0, 1.0],
  "start": [2.0, -1.0],
  "stop": {"max_iters": 1000000, "residual_tol": 1e-12, "target_tol": 0.01},
  "stride": 100,
  "seed": 42
}"#;
    std::fs::write(path, spec).unwrap();
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn run_two_halfspace_problem_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("problem.json");
    write_two_halfspace_spec(&spec);
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["run", "--spec"])
        .arg(&spec)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_success(&out);

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["stop_reason"], "target_met");
    assert!(summary["final_dist"].as_f64().unwrap() <= 1e-2);

    let trace = std::fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("n,residual_S,residual_T,dist_to_ref\n"));
    assert_eq!(trace.lines().count() as u64, summary["iters"].as_u64().unwrap() + 1);
}

#[test]
fn run_is_byte_deterministic_for_fixed_spec_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("problem.json");
    write_two_halfspace_spec(&spec);
    for sub in ["a", "b"] {
        let out = bin()
            .args(["run", "--spec"])
            .arg(&spec)
            .arg("--out")
            .arg(dir.path().join(sub))
            .args(["--seed", "7"])
            .output()
            .unwrap();
        assert_success(&out);
    }
    let a = std::fs::read(dir.path().join("a/trace.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/trace.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn summable_alpha_exits_one_with_hypothesis_message() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("problem.json");
    write_two_halfspace_spec(&spec_path);
    let text = std::fs::read_to_string(&spec_path)
        .unwrap()
        .replace(r#""p": 1.0"#, r#""p": 2.0"#);
    std::fs::write(&spec_path, text).unwrap();
    let out = bin()
        .args(["run", "--spec"])
        .arg(&spec_path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("divergent"), "stderr: {stderr}");
}

#[test]
fn exhausted_step_budget_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("problem.json");
    write_two_halfspace_spec(&spec);
    let out = bin()
        .args(["run", "--spec"])
        .arg(&spec)
        .arg("--out")
        .arg(dir.path().join("out"))
        .args(["--max-iters", "50"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_spec_exits_one_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("broken.json");
    std::fs::write(&spec, "{\n  \"dimension\": 2,\n  \"oops\n}").unwrap();
    let out = bin()
        .args(["run", "--spec"])
        .arg(&spec)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line"), "expected a line-anchored message, got: {stderr}");
}

#[test]
fn identity_sequence_spec_converges_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("problem.json");
    let spec = r#"{
  "dimension": 2,
  "sequence": {"kind": "constant", "operator": {"type": "identity"}},
  "alpha": {"family": "power", "c": 1.0, "p": 1.0, "offset": 0.0},
  "anchor": [1.0, 1.0],
  "start": [1.0, 1.0],
  "stop": {"max_iters": 1000, "residual_tol": 1e-10}
}"#;
    std::fs::write(&spec_path, spec).unwrap();
    let out = bin()
        .args(["run", "--spec"])
        .arg(&spec_path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_success(&out);
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/summary.json")).unwrap(),
    )
    .unwrap();
    // anchored at its own retraction, the trace is stationary at u
    assert!(summary["final_dist"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn verify_lemmas_suite_exits_zero_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["verify", "lemmas", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_success(&out);
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("verify_lemmas.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["pass"], true);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("suite lemmas: PASS"));
}

#[test]
fn verify_sns_reports_the_negative_control() {
    let out = bin().args(["verify", "sns"]).output().unwrap();
    assert_success(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("fail (as required)"), "stdout: {stdout}");
}

#[test]
fn verify_unknown_suite_exits_one() {
    let out = bin().args(["verify", "bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn compare_writes_a_matrix_row_per_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("problem.json");
    write_two_halfspace_spec(&spec);
    let csv_path = dir.path().join("matrix.csv");
    let out = bin()
        .args(["compare", "--spec"])
        .arg(&spec)
        .args(["--schedule", r#"{"family":"power","c":1.0,"p":1.0,"offset":0.0}"#])
        .args(["--schedule", r#"{"family":"power","c":1.0,"p":0.7,"offset":0.0}"#])
        .args(["--schedule", r#"{"family":"power","c":1.0,"p":0.5,"offset":0.0}"#])
        .args(["--max-iters", "400000"])
        .arg("--out")
        .arg(&csv_path)
        .output()
        .unwrap();
    assert_success(&out);
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "schedule,iters_to_1e-1,iters_to_1e-2,iters_to_1e-3");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        // every schedule reaches the 1e-2 threshold on this problem
        let cells: Vec<&str> = row.rsplitn(4, ',').collect();
        assert!(!cells[1].is_empty(), "row missing 1e-2 crossing: {row}");
    }
}

#[test]
fn compare_gate_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("problem.json");
    write_two_halfspace_spec(&spec);
    let out = bin()
        .args(["compare", "--spec"])
        .arg(&spec)
        .args(["--schedule", r#"{"family":"power","c":1.0,"p":2.0,"offset":0.0}"#])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn oracle_subcommand_answers_project_and_prox_requests() {
    let dir = tempfile::tempdir().unwrap();
    let request = dir.path().join("request.json");
    std::fs::write(
        &request,
        r#"{"kind":"project","sets":[{"type":"halfspace","a":[1.0,0.0],"b":0.0},{"type":"halfspace","a":[0.0,1.0],"b":0.0}],"u":[1.0,1.0]}"#,
    )
    .unwrap();
    let out = bin().args(["oracle", "--spec"]).arg(&request).output().unwrap();
    assert_success(&out);
    let result: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert_eq!(result["method"], "active_set_enumeration");
    let value = result["value"].as_array().unwrap();
    assert!(value[0].as_f64().unwrap().abs() <= 1e-9);
    assert!(value[1].as_f64().unwrap().abs() <= 1e-9);

    std::fs::write(
        &request,
        r#"{"kind":"prox","f":{"type":"abs_value"},"lambda":1.0,"x":2.5}"#,
    )
    .unwrap();
    let out = bin().args(["oracle", "--spec"]).arg(&request).output().unwrap();
    assert_success(&out);
    let result: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert_eq!(result["method"], "scalar_minimization");
    assert!((result["value"][0].as_f64().unwrap() - 1.5).abs() <= 1e-9);
}

#[test]
fn viscosity_spec_runs_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("problem.json");
    let spec = r#"{
  "dimension": 1,
  "sequence": {
    "kind": "constant",
    "operator": {"type": "project", "set": {"type": "halfspace", "a": [1.0], "b": 0.0}}
  },
  "alpha": {"family": "power", "c": 1.0, "p": 1.0, "offset": 0.0},
  "anchor": [3.0],
  "start": [3.0],
  "contraction": {"type": "scale", "theta": 0.5},
  "stop": {"max_iters": 200000, "residual_tol": 1e-3}
}"#;
    std::fs::write(&spec_path, spec).unwrap();
    let out = bin()
        .args(["run", "--spec"])
        .arg(&spec_path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_success(&out);
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/summary.json")).unwrap(),
    )
    .unwrap();
    // the reference is the fixed point of the retracted contraction (zero)
    assert!(summary["final_dist"].as_f64().unwrap() <= 1e-2);
}

#[test]
fn resolvent_spec_runs_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("problem.json");
    let spec = r#"{
  "dimension": 1,
  "sequence": {"kind": "resolvent", "f": {"type": "abs_value"}},
  "lambda": {"family": "constant", "value": 1.0},
  "alpha": {"family": "power", "c": 1.0, "p": 1.0, "offset": 0.0},
  "anchor": [5.0],
  "start": [5.0],
  "stop": {"max_iters": 1000000, "residual_tol": 1e-12, "target_tol": 0.01}
}"#;
    std::fs::write(&spec_path, spec).unwrap();
    let out = bin()
        .args(["run", "--spec"])
        .arg(&spec_path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_success(&out);
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/summary.json")).unwrap(),
    )
    .unwrap();
    assert!(summary["final_dist"].as_f64().unwrap() <= 1e-2);
}

#[test]
fn cfp_spec_runs_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("problem.json");
    let spec = r#"{
  "dimension": 2,
  "sequence": {
    "kind": "cfp",
    "ops": [
      {"type": "project", "set": {"type": "halfspace", "a": [1.0, 0.0], "b": 0.0}},
      {"type": "project", "set": {"type": "halfspace", "a": [0.0, 1.0], "b": 0.0}}
    ]
  },
  "gamma": {"family": "constant", "value": 0.5},
  "alpha": {"family": "power", "c": 1.0, "p": 1.0, "offset": 0.0},
  "anchor": [2.0, 1.0],
  "start": [0.5, 0.5],
  "stop": {"max_iters": 1000000, "residual_tol": 1e-12, "target_tol": 0.01}
}"#;
    std::fs::write(&spec_path, spec).unwrap();
    let out = bin()
        .args(["run", "--spec"])
        .arg(&spec_path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_success(&out);
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/summary.json")).unwrap(),
    )
    .unwrap();
    assert!(summary["final_dist"].as_f64().unwrap() <= 1e-2);
}
