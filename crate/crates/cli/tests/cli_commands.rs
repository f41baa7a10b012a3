use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use meancurv::curvature::{CurvatureProfile, ProfileSpec};
use meancurv::spectral::{make_grid, residual, AxisymmetricFunction};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meancurv")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn read_solution(path: &Path) -> Vec<[f64; 4]> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["r", "u", "w", "residual"]);
    rdr.records()
        .map(|r| {
            let r = r.unwrap();
            [0, 1, 2, 3].map(|i| r[i].parse::<f64>().unwrap())
        })
        .collect()
}

#[test]
fn verify_default_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let doc = read_json(&dir.path().join("verify.json"));
    assert_eq!(doc["schema"], 1);
    assert_eq!(doc["n"], 3);
    assert_eq!(doc["passed"], true);
    assert_eq!(doc["checks"].as_array().unwrap().len(), 10);
}

#[test]
fn verify_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(&["verify", "--n", "4", "--out", a.path().to_str().unwrap()]);
    run(&["verify", "--n", "4", "--out", b.path().to_str().unwrap()]);
    assert_eq!(read_json(&a.path().join("verify.json")), read_json(&b.path().join("verify.json")));
}

#[test]
fn coarse_grid_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify", "--grid", "8", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let doc = read_json(&dir.path().join("verify.json"));
    let checks = doc["checks"].as_array().unwrap();
    let quad = checks.iter().find(|c| c["name"] == "quadrature-convergence").unwrap();
    assert_eq!(quad["passed"], false);
    assert!(quad["measured"].as_f64().unwrap() > 1e-8);
}

#[test]
fn dimension_two_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["verify", "solve", "continue", "kwcheck"] {
        let o = run(&[cmd, "--n", "2", "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code(&o), 1, "{cmd}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("n must be at least 3"));
    }
}

#[test]
fn bad_config_file_and_profile() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"n": 4, "solver": {"newton_tol": -1}}"#).unwrap();
    assert_eq!(code(&run(&["solve", "--config", cfg.to_str().unwrap()])), 1);
    std::fs::write(&cfg, "{not json").unwrap();
    assert_eq!(code(&run(&["solve", "--config", cfg.to_str().unwrap()])), 1);
    assert_eq!(code(&run(&["kwcheck", "--profile", "nope", "--out", dir.path().to_str().unwrap()])), 1);
    assert_eq!(code(&run(&["kwcheck", "--profile", "cos2", "amp=x", "--out", dir.path().to_str().unwrap()])), 1);
    assert_eq!(code(&run(&["solve", "--n", "4", "--p", "2.5", "--out", dir.path().to_str().unwrap()])), 1);
}

#[test]
fn constant_curvature_gives_constant_solution() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["solve", "--n", "4", "--grid", "64", "--profile", "constant", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    for row in read_solution(&dir.path().join("solution.csv")) {
        assert!((row[2] - 1.0).abs() < 1e-8, "w = {}", row[2]);
    }
    let doc = read_json(&dir.path().join("summary.json"));
    assert!((doc["mu"].as_f64().unwrap() - 1.0).abs() < 1e-8);
}

#[test]
fn solution_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"n": 4, "grid": 128, "profile": {"name": "two_bump", "params": {"alpha": 1.5, "a": 0.5}}}"#).unwrap();
    let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read_json(&dir.path().join("summary.json"));
    assert_eq!(doc["schema"], 1);
    let p = doc["p"].as_f64().unwrap();
    assert!(doc["residual"].as_f64().unwrap() < 1e-6);
    let spec: ProfileSpec = serde_json::from_value(doc["profile"].clone()).unwrap();
    let h: CurvatureProfile = spec.build().unwrap();
    let grid = Arc::new(make_grid(4, 128).unwrap().with_dilation(doc["dilation"].as_f64().unwrap()).unwrap());
    let rows = read_solution(&dir.path().join("solution.csv"));
    for (row, r) in rows.iter().zip(grid.nodes()) {
        assert_eq!(row[0], *r);
    }
    let w = AxisymmetricFunction::from_values(grid, rows.iter().map(|r| r[2]).collect());
    let again = residual(&w, &h, p, 1.0).unwrap();
    for (row, v) in rows.iter().zip(again.values()) {
        assert!((row[3] - v).abs() < 1e-10, "{} vs {v}", row[3]);
    }
    assert!((again.sup_norm() - doc["residual"].as_f64().unwrap()).abs() < 1e-10);
}

#[test]
fn violating_profile_warns_before_solving() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["solve", "--n", "4", "--grid", "64", "--profile", "monotone", "--p", "1.5", "--out", dir.path().to_str().unwrap()]);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("fails the Kazdan-Warner sign-change test"), "{err}");
}

#[test]
fn continuation_with_constant_curvature_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["continue", "--n", "4", "--grid", "64", "--profile", "constant", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("continuation.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["p", "c_p", "sup_norm", "lambda_conc", "lambda_star", "q_n", "residual", "status"]);
    let sups: Vec<f64> = rdr.records().map(|r| r.unwrap()[2].parse().unwrap()).collect();
    assert_eq!(sups.len(), 5);
    assert!(sups.iter().all(|s| (s - 1.0).abs() < 1e-8), "{sups:?}");
    let doc = read_json(&dir.path().join("summary.json"));
    assert_eq!(doc["concentration"], false);
}

#[test]
fn kwcheck_reports_witnesses_and_flatness() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["kwcheck", "--n", "4", "--profile", "two_bump", "alpha=1.5", "a=0.5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let doc = read_json(&dir.path().join("kwcheck.json"));
    assert_eq!(doc["kazdan_warner"]["holds"], true);
    let rows = doc["critical_points"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r["admissible"] == true));
    let o = run(&["kwcheck", "--profile", "monotone", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(read_json(&dir.path().join("kwcheck.json"))["kazdan_warner"]["holds"], false);
}
