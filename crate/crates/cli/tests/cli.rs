use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bmirelax::io::ReportFile;
use tempfile::TempDir;

const SCALAR: &str = r#"{"schema_version": "1", "n": 1, "m": 1, "c": [1], "F0": [-1], "K": [[0]],
  "L": [{"i": 0, "j": 0, "matrix": [1]}], "x_check": [2]}"#;
const EMPTY: &str = r#"{"schema_version": "1", "n": 1, "m": 1, "c": [1], "F0": [1], "K": [[0]],
  "L": [{"i": 0, "j": 0, "matrix": [1]}]}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bmirelax"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn report(out: &Output) -> ReportFile {
    ReportFile::from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap()
}

#[test]
fn bounds_on_scalar_instance() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "p.json", SCALAR);
    let out = run(&["bounds", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let bounds = r.bounds.unwrap();
    assert_eq!(bounds.len(), 3);
    for b in bounds {
        assert_eq!(b.status, "optimal");
        assert!((b.value.0 + 1.0).abs() <= 1e-4, "{:?}", b);
    }
}

#[test]
fn solve_parabolic_is_exact() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "p.json", SCALAR);
    let out = run(&["solve", "--cone", "parabolic", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let res = &r.results[0];
    let cert = res.certificate.as_ref().unwrap();
    assert!(cert.exact && cert.feasible);
    assert!(res.x[0].0 < 1.0 + 1e-4);
}

#[test]
fn exit_code_violated_on_edited_solution() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "p.json", SCALAR);
    let s = write(dir.path(), "s.json", r#"{"schema_version": "1", "cone": "sdp", "x": [3], "X": [9], "Lambda": [0]}"#);
    let out = run(&["certify", p.to_str().unwrap(), s.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let cert = report(&out).results[0].certificate.clone().unwrap();
    assert!(cert.bmi_violation.0 > 0.0);
    assert_eq!(cert.verdict, "violated");
}

#[test]
fn exit_code_infeasible() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "p.json", EMPTY);
    for cmd in ["bounds", "solve"] {
        let out = run(&[cmd, p.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{cmd}");
    }
}

#[test]
fn exit_code_inaccurate() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "p.json", SCALAR);
    let out = run(&["relax", "--max-iter", "3", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(report(&out).results[0].status, "inaccurate");
}

#[test]
fn exit_code_usage_and_data_errors() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(run(&["bounds", missing.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["bounds"]).status.code(), Some(1));
    let dup = write(
        dir.path(),
        "dup.json",
        r#"{"schema_version": "1", "n": 2, "m": 1, "c": [1, 0], "F0": [-1], "K": [[0], [0]],
          "L": [{"i": 0, "j": 1, "matrix": [1]}, {"i": 1, "j": 0, "matrix": [1]}]}"#,
    );
    let out = run(&["bounds", dup.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("L"));
    let p = write(dir.path(), "p.json", SCALAR);
    assert_eq!(run(&["solve", "--x-check", "1,2", p.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn strict_mode_rejects_unknown_fields() {
    let dir = TempDir::new().unwrap();
    let text = SCALAR.replacen('{', r#"{"comment": "x", "#, 1);
    let p = write(dir.path(), "p.json", &text);
    assert_eq!(run(&["bounds", p.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(run(&["bounds", "--strict", p.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn reports_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "p.json", SCALAR);
    let p = p.to_str().unwrap();
    for args in [vec!["solve", "--seed", "5", p], vec!["bounds", p], vec!["sequential", p]] {
        let a = run(&args);
        let b = run(&args);
        assert!(!a.stdout.is_empty());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn out_file_and_certify_round_trip() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "p.json", SCALAR);
    let r = dir.path().join("r.json");
    let out = run(&["solve", "--out", r.to_str().unwrap(), p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let again = run(&["certify", p.to_str().unwrap(), r.to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(report(&again).results[0].certificate.as_ref().unwrap().verdict, "verified");
}

#[test]
fn relax_writes_dump() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "p.json", SCALAR);
    let d = dir.path().join("d.txt");
    let out = run(&["relax", "--cone", "socp", "--dump", d.to_str().unwrap(), p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let sf = bmirelax::io::read_dump(&fs::read_to_string(d).unwrap()).unwrap();
    assert_eq!(sf.cost.len(), 2);
}

#[test]
fn oracle_reports_grid_data() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "p.json", SCALAR);
    let out = run(&["oracle", "--x-check", "0", "--resolution", "0.01", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let o = report(&out).oracle.unwrap();
    assert_eq!(o.feasible_nodes, 201);
    assert!((o.optimum_value.unwrap().0 + 1.0).abs() < 1e-12);
    assert_eq!(o.distance.unwrap().0, 0.0);
    let e = write(dir.path(), "e.json", EMPTY);
    assert_eq!(run(&["oracle", e.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn timing_only_on_request() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "p.json", SCALAR);
    assert!(report(&run(&["bounds", p.to_str().unwrap()])).timing.is_none());
    assert!(report(&run(&["bounds", "--timing", p.to_str().unwrap()])).timing.is_some());
}
