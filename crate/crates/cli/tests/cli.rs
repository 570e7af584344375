use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fbl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbl"))
        .args(args)
        .env_remove("FBL_SEED")
        .env_remove("FBL_THREADS")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn norm_of_moduli_sum_in_the_euclidean_plane() {
    let dir = tempfile::tempdir().unwrap();
    let b = write(dir.path(), "b.json", r#"{"space": {"r": 2, "dim": 2}, "vectors": [[1, 0], [0, 1]]}"#);
    let out = fbl(&["norm", "--binding", b.to_str().unwrap(), "--expr", "abs(d0)+abs(d1)", "--p", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert!((v["lower"].as_f64().unwrap() - 2.0).abs() < 1e-6);
    assert!(v["upper"].as_f64().unwrap() >= 2.0 - 1e-9);
}

#[test]
fn separate_space_file_and_generator() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "s.json", r#"{"r": "inf", "dim": 3}"#);
    let b = write(dir.path(), "b.json", r#"{"vectors": [[1, 0, 0]]}"#);
    let out = fbl(&["norm", "--space", s.to_str().unwrap(), "--binding", b.to_str().unwrap(), "--expr", "d0"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["lower"].as_f64(), Some(1.0));
    assert_eq!(v["upper"].as_f64(), Some(1.0));
}

#[test]
fn input_errors_exit_one_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "b.json", r#"{"space": {"r": 2, "dim": 2}, "vectors": [[1, 0]]}"#);
    let no_space = write(dir.path(), "n.json", r#"{"vectors": [[1, 0]]}"#);
    let bad_dim = write(dir.path(), "d.json", r#"{"space": {"r": 2, "dim": 2}, "vectors": [[1, 0, 0]]}"#);
    let g = good.to_str().unwrap();
    let cases: Vec<(Vec<&str>, &str)> = vec![
        (vec!["norm", "--binding", g, "--expr", "abs(d0"], "expr"),
        (vec!["norm", "--binding", g, "--expr", "d0", "--p", "zero"], "p"),
        (vec!["norm", "--binding", no_space.to_str().unwrap(), "--expr", "d0"], "space"),
        (vec!["norm", "--binding", bad_dim.to_str().unwrap(), "--expr", "d0"], "binding"),
        (vec!["norm", "--binding", g, "--expr", "d3"], "d3"),
        (vec!["experiment", "--name", "haar-level", "--params", "m=3"], "m"),
        (vec!["experiment", "--name", "no-such"], "no-such"),
        (vec!["frobnicate"], "frobnicate"),
    ];
    for (args, field) in cases {
        let out = fbl(&args);
        let err = stderr(&out);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {err}");
        assert_eq!(err.trim().lines().count(), 1, "{args:?}: {err}");
        assert!(err.contains(field), "{args:?}: {err}");
    }
}

#[test]
fn missing_file_is_an_input_error() {
    let out = fbl(&["summing", "--map", "/nonexistent/t.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("map"));
}

#[test]
fn summing_on_sup_norm_domain_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let t = write(
        dir.path(),
        "t.json",
        r#"{"matrix": [[1, -2], [0.5, 1]], "domain": {"r": "inf", "dim": 2}, "codomain": {"r": 1, "dim": 2}}"#,
    );
    let out = fbl(&["summing", "--map", t.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert!((v["lower"].as_f64().unwrap() - 4.5).abs() < 1e-12);
    assert_eq!(v["upper_certified"], Value::Bool(true));

    let out = fbl(&["summing", "--map", t.to_str().unwrap(), "--q1", "--p", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert!(v["lower"].as_f64().unwrap() <= v["upper"].as_f64().unwrap() + 1e-12);
}

#[test]
fn extension_into_sup_norm_target_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "f.json", r#"{"ambient": {"r": 3, "dim": 3}, "basis": [[1, 1, 0], [0, 1, -1]], "complement_basis": []}"#);
    let t = write(
        dir.path(),
        "t.json",
        r#"{"matrix": [[1, 0.5], [-0.3, 2]], "domain": {"r": 2, "dim": 2}, "codomain": {"r": "inf", "dim": 2}}"#,
    );
    let out = fbl(&["extend", "--subspace", f.to_str().unwrap(), "--map", t.to_str().unwrap(), "--p", "inf"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert!((v["lower"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!((v["upper"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn haar_experiment_passes_with_value_ten() {
    let out = fbl(&["experiment", "--name", "haar-level", "--params", "n=2", "a=1,2,3,4"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    let records = v["records"].as_array().unwrap();
    assert!(records.iter().all(|r| r["pass"] != Value::Bool(false)));
    assert!(records.iter().any(|r| r["value"].as_f64() == Some(10.0)));
}

#[test]
fn csv_report_has_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let out = fbl(&["experiment", "--name", "haar-level", "--format", "csv", "-o", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = fs::read_to_string(path).unwrap();
    assert_eq!(text.lines().next(), Some("experiment,quantity,lower,upper,certified,reference,pass"));
    assert!(text.lines().count() > 1);
}

#[test]
fn failing_rule_exits_three_and_still_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.json");
    let gp = dir.path().join("h.dat");
    let out = fbl(&["experiment", "--name", "hilbert-bibasis", "-o", path.to_str().unwrap(), "--gnuplot", gp.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    let v: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(v["name"], "hilbert-bibasis");
    assert!(fs::read_to_string(gp).unwrap().lines().any(|l| !l.starts_with('#')));
}

#[test]
fn seeded_runs_are_identical() {
    let a = fbl(&["experiment", "--name", "rad-linfty", "--seed", "7"]);
    let b = Command::new(env!("CARGO_BIN_EXE_fbl"))
        .args(["experiment", "--name", "rad-linfty"])
        .env("FBL_SEED", "7")
        .env("FBL_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["seed"], 7);
}

#[test]
fn list_prints_every_catalog_entry() {
    let out = fbl(&["list"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["haar-level", "summing-basis", "hilbert-bibasis", "poe-constants"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
}

#[test]
fn bad_thread_count_is_rejected() {
    let out = Command::new(env!("CARGO_BIN_EXE_fbl")).arg("list").env("FBL_THREADS", "many").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("FBL_THREADS"));
}
