use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const FIGURE_ONE: &str = r#"{"states":["p","q"],"labels":["a"],"transitions":[
  {"from":"p","label":"a","dist":{"p":"1/3","q":"2/3"}},
  {"from":"p","label":"a","dist":{"q":1}}]}"#;

fn plmu(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plmu"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn column(report: &Value, field: &str) -> Vec<f64> {
    report["states"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r[field].as_f64().unwrap())
        .collect()
}

#[test]
fn eval_figure_one() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", FIGURE_ONE);
    let out = plmu(&["eval", s(&m), "nu X. [a] X", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(column(&json(&out), "denotational"), vec![1.0, 1.0]);
    let out = plmu(&["eval", s(&m), "mu X. <a> X", "--format", "json"]);
    assert_eq!(column(&json(&out), "denotational"), vec![0.0, 0.0]);
    let out = plmu(&["eval", s(&m), "mu X. <a> X"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.find("\np ").unwrap() < text.find("\nq ").unwrap(), "{text}");
}

#[test]
fn missing_model_is_an_input_error() {
    let out = plmu(&["eval", "/nonexistent/model.json", "mu X. X"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.json"));
}

#[test]
fn invalid_model_and_formula_are_input_errors() {
    let dir = TempDir::new().unwrap();
    let bad = write(
        &dir,
        "bad.json",
        r#"{"states":["p","q"],"labels":["a"],"transitions":[{"from":"p","label":"a","dist":{"p":"1/2"}}]}"#,
    );
    let out = plmu(&["eval", s(&bad), "mu X. X"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mass"));
    let m = write(&dir, "m.json", FIGURE_ONE);
    assert_eq!(plmu(&["eval", s(&m), "mu X. <a X"]).status.code(), Some(2));
    assert_eq!(plmu(&["eval", s(&m), "<a> Y"]).status.code(), Some(2));
}

#[test]
fn non_convergence_exits_three() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", FIGURE_ONE);
    let out = plmu(&["eval", s(&m), "nu X. <a> X", "--tol", "1e-15", "--max-iter", "3"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn check_figure_one() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", FIGURE_ONE);
    for f in ["mu X. <a> X", "nu X. [a] X | <a> (mu Y. Y)"] {
        let out = plmu(&["check", s(&m), f, "--format", "json"]);
        assert_eq!(out.status.code(), Some(0), "{f}");
        let r = json(&out);
        assert!(r["gaps"]["max"].as_f64().unwrap() <= 1e-6);
        assert_eq!(r["gaps"]["passed"], Value::Bool(true));
        assert_eq!(r["witnesses"].as_array().unwrap().len(), 2);
    }
    let out = plmu(&["check", s(&m), "<a> (nu X. X)", "--format", "json"]);
    let r = json(&out);
    assert_eq!(r["gaps"]["denotational_lower"].as_f64(), Some(0.0));
    assert_eq!(r["gaps"]["lower_upper"].as_f64(), Some(0.0));
    assert_eq!(column(&r, "lower"), vec![1.0, 0.0]);
}

#[test]
fn check_respects_budget_and_solver_choice() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", FIGURE_ONE);
    let out = plmu(&["check", s(&m), "mu X. <a> X", "--budget", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = plmu(&["check", s(&m), "mu X. <a> X", "--budget", "1", "--solver", "iteration", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert!(r["gaps"]["denotational_iteration"].is_number());
    assert!(r["gaps"].get("lower_upper").is_none());
}

#[test]
fn check_with_valuation() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", FIGURE_ONE);
    let rho = write(&dir, "rho.json", r#"{"Y": {"p": 0.2, "q": 0.9}}"#);
    let out = plmu(&["check", s(&m), "mu X. [a] X | Y", "--rho", s(&rho), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let bad = write(&dir, "bad.json", r#"{"Y": {"p": 1.5}}"#);
    let out = plmu(&["check", s(&m), "mu X. [a] X | Y", "--rho", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn game_dump() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", FIGURE_ONE);
    let out = plmu(&["game", s(&m), "mu X. <a> X"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("s0 <p, mu X. <a> X> | P1 | 0 | - | s2\n"), "{text}");
    let out = plmu(&["game", s(&m), "mu X. <a> X", "--format", "json"]);
    let states = json(&out);
    assert_eq!(states.as_array().unwrap().len(), text.lines().count());
}

#[test]
fn simulate_with_witness_and_file() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", FIGURE_ONE);
    let out = plmu(&["simulate", s(&m), "mu X. <a> X", "-n", "1000", "--seed", "3", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    for sim in r["simulation"].as_array().unwrap() {
        assert_eq!(sim["mean"].as_f64(), Some(0.0));
        assert_eq!(sim["exact"].as_f64(), Some(0.0));
    }
    let again = plmu(&["simulate", s(&m), "mu X. <a> X", "-n", "1000", "--seed", "3", "--format", "json"]);
    assert_eq!(json(&again)["simulation"], r["simulation"]);

    let profile = write(&dir, "profile.json", "[[0, 7]]");
    let out = plmu(&["simulate", s(&m), "mu X. <a> X", "--profile", s(&profile)]);
    assert_eq!(out.status.code(), Some(2));
    let garbage = write(&dir, "garbage.json", "{");
    let out = plmu(&["simulate", s(&m), "mu X. <a> X", "--profile", s(&garbage)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn random_test_runs() {
    let out = plmu(&["random-test", "--count", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let a = plmu(&["random-test", "--count", "15", "--seed", "5", "--budget", "10000", "--format", "json"]);
    assert_eq!(a.status.code(), Some(0));
    let b = plmu(&["random-test", "--count", "15", "--seed", "5", "--budget", "10000", "--format", "json"]);
    let (a, b) = (json(&a), json(&b));
    assert_eq!(a["checked"], 15);
    assert!(a["worst_gap"].as_f64().unwrap() <= 1e-6);
    assert_eq!(a["worst_gap"], b["worst_gap"]);
    assert_eq!(a["worst_index"], b["worst_index"]);
    assert_eq!(a["skipped"], b["skipped"]);
}
