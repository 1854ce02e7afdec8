use std::fs;
use std::path::Path;

use cytorus::cli::{self, EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, EXIT_VERIFICATION};

fn run(args: &[&str]) -> i32 {
    let mut all = vec!["cytorus"];
    all.extend_from_slice(args);
    cli::run(all)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn kt_solve_then_verify() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run1");
    assert_eq!(run(&["solve", "--geometry", "kt-xy", "--F", "0.2*cos(2*pi*x)", "--grid", "32", "--out", p(&out)]), EXIT_OK);
    for f in ["manifest.json", "diagnostics.json", "frame.json", "F.csv", "p.csv", "h.csv", "omega_tilde.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["geometry"], "kt-xy");
    assert_eq!(manifest["grid"], serde_json::json!([32, 32]));
    assert!(manifest["f_shift"].as_f64().unwrap() < 0.0);
    assert!(!manifest["homotopy_trace"].as_array().unwrap().is_empty());
    assert_eq!(run(&["verify", p(&out)]), EXIT_OK);
}

#[test]
fn corrupted_artifact_fails_verification() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    assert_eq!(run(&["solve", "--geometry", "nil4", "--F", "0.1*cos(2*pi*x)", "--grid", "16", "--out", p(&out)]), EXIT_OK);
    let csv = out.join("omega_tilde_13.csv");
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut row: Vec<String> = lines[4].split(',').map(String::from).collect();
    row[2] = format!("{:?}", row[2].parse::<f64>().unwrap() + 1e-3);
    lines[4] = row.join(",");
    fs::write(&csv, lines.join("\n")).unwrap();
    assert_eq!(run(&["verify", p(&out)]), EXIT_VERIFICATION);
}

#[test]
fn zero_rhs_artifacts_verify_for_every_geometry() {
    let tmp = tempfile::tempdir().unwrap();
    for g in ["kt-xy", "nil4", "nil3-yt", "sol-simple", "sol-foliation"] {
        let out = tmp.path().join(g);
        assert_eq!(run(&["solve", "--geometry", g, "--F", "0", "--grid", "8", "--out", p(&out)]), EXIT_OK, "{g}");
        assert_eq!(run(&["verify", p(&out)]), EXIT_OK, "{g}");
    }
}

#[test]
fn strict_rejects_unnormalized_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("F.csv");
    let mut text = String::from("n1,n2\n8,8\n");
    for _ in 0..8 {
        text.push_str(&["0.3"; 8].join(","));
        text.push('\n');
    }
    fs::write(&csv, text).unwrap();
    assert_eq!(run(&["solve", "--geometry", "nil4", "--F-file", p(&csv), "--strict"]), EXIT_VALIDATION);
    assert_eq!(run(&["solve", "--geometry", "nil4", "--F-file", p(&csv)]), EXIT_OK);
}

#[test]
fn gma_problem_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("problem.json");
    fs::write(&cfg, r#"{"a": 1.0, "b": 2.0, "c": 0.5, "F": "0.1*sin(2*pi*x)*cos(2*pi*y)", "grid": 16}"#).unwrap();
    assert_eq!(run(&["solve", "--gma", p(&cfg)]), EXIT_VALIDATION);
    let out = tmp.path().join("gma");
    assert_eq!(run(&["solve", "--gma", p(&cfg), "--renormalize", "--out", p(&out)]), EXIT_OK);
    assert!(out.join("p.csv").exists());
    assert_eq!(run(&["verify", p(&out)]), EXIT_OK);
}

#[test]
fn config_file_with_relative_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let mut text = String::from("n1,n2\n16,16\n");
    for i in 0..16 {
        let row: Vec<String> =
            (0..16).map(|_| format!("{:?}", 0.1 * (2.0 * std::f64::consts::PI * i as f64 / 16.0).cos())).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(tmp.path().join("F.csv"), text).unwrap();
    let cfg = tmp.path().join("inst.json");
    fs::write(
        &cfg,
        r#"{"geometry": "nil4", "model": "nil4", "metric": "identity", "omega": [0, 0, 1, 1, 0, 0], "F": {"csv": "F.csv"}, "scheme": "spectral", "options": {"strict": false}}"#,
    )
    .unwrap();
    assert_eq!(run(&["solve", "--config", p(&cfg)]), EXIT_OK);
    assert_eq!(run(&["solve", "--config", p(&cfg), "--grid", "32"]), EXIT_VALIDATION);
}

#[test]
fn usage_errors_are_validation_failures() {
    assert_eq!(run(&["solve"]), EXIT_VALIDATION);
    assert_eq!(run(&["solve", "--geometry", "nil5", "--F", "0"]), EXIT_VALIDATION);
    assert_eq!(run(&["solve", "--geometry", "nil4"]), EXIT_VALIDATION);
    assert_eq!(run(&["solve", "--geometry", "nil4", "--F", "tan(x)"]), EXIT_VALIDATION);
    assert_eq!(run(&["solve", "--geometry", "nil4", "--F", "0", "--grid", "12"]), EXIT_VALIDATION);
    assert_eq!(run(&["solve", "--geometry", "nil4", "--F", "0", "--strict", "--renormalize"]), EXIT_VALIDATION);
    assert_eq!(run(&["verify", "/nonexistent/dir"]), EXIT_VALIDATION);
    assert_eq!(run(&["frobnicate"]), EXIT_VALIDATION);
}

#[test]
fn nonconvergence_is_a_numerical_failure() {
    let code = run(&["solve", "--geometry", "kt-xy", "--F", "3*cos(2*pi*x)", "--grid", "16", "--tol-residual", "1e-30"]);
    assert_eq!(code, EXIT_NUMERICAL);
}

#[test]
fn identical_runs_give_identical_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let args = ["solve", "--geometry", "nil3-yt", "--F", "0.1*cos(2*pi*y)", "--grid", "16", "--seed", "7", "--out", p(out)];
        assert_eq!(run(&args), EXIT_OK);
    }
    for f in ["p.csv", "omega_tilde_12.csv", "alpha_frame_a3.csv"] {
        if a.join(f).exists() {
            assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
        }
    }
    assert!(a.join("p.csv").exists());
}

#[test]
fn convergence_study() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("conv.json");
    fs::write(&cfg, r#"{"p": "0.01*sin(2*pi*x)*cos(2*pi*y)", "scheme": "fd4", "grids": [32, 64]}"#).unwrap();
    let study = cli::cmd_convergence(&cfg, Some(&tmp.path().join("study.json"))).unwrap();
    assert!(study.levels[1].order.unwrap() >= 3.5);
    assert!(tmp.path().join("study.json").exists());

    fs::write(&cfg, r#"{"p": "0.01*sin(2*pi*x)*cos(2*pi*y)", "grids": [64]}"#).unwrap();
    assert!(cli::cmd_convergence(&cfg, None).unwrap().levels[0].error <= 1e-12);

    fs::write(&cfg, r#"{"p": "0", "grids": [16, 32]}"#).unwrap();
    let study = cli::cmd_convergence(&cfg, None).unwrap();
    assert!(study.levels.iter().all(|l| l.error == 0.0));
}
