//! The `flarelite` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

fn flarelite(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flarelite")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> (String, String) {
    let out = flarelite(args);
    let (stdout, stderr) =
        (String::from_utf8_lossy(&out.stdout).into_owned(), String::from_utf8_lossy(&out.stderr).into_owned());
    assert!(out.status.success(), "{args:?} failed:\n{stderr}");
    (stdout, stderr)
}

fn gen(dir: &Path, format: &str) {
    ok(&["gen", "--sf", "0.005", "--seed", "7", "--out", dir.to_str().unwrap(), "--format", format]);
}

fn parse_csv(text: &str) -> Vec<Vec<String>> {
    text.lines().map(|l| l.split('|').map(str::to_string).collect()).collect()
}

fn same_cell(a: &str, b: &str) -> bool {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0),
        _ => a == b,
    }
}

#[test]
fn thread_count_does_not_change_answers() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    gen(dir.path(), "fbc");
    for q in ["q1", "q3", "q13"] {
        let run = |t: &str| parse_csv(&ok(&["query", "--query", q, "--data", d, "--threads", t, "--format", "csv"]).0);
        let (one, four) = (run("1"), run("4"));
        assert!(one.len() > 1, "{q}: {one:?}");
        assert_eq!(one.len(), four.len(), "{q}");
        for (a, b) in one.iter().zip(&four) {
            assert!(a.iter().zip(b).all(|(x, y)| same_cell(x, y)), "{q}: {a:?} vs {b:?}");
        }
    }
}

#[test]
fn converted_files_are_read_by_column() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    gen(dir.path(), "csv");
    ok(&["convert", "--in", "csv", "--out", "fbc", "--data", d]);
    assert!(dir.path().join("lineitem.fbc").exists());
    let (stdout, stderr) = ok(&["query", "--query", "q6", "--data", d, "--stats"]);
    assert!(stdout.contains("revenue"), "{stdout}");
    assert!(stderr.contains("io: 4 columns"), "{stderr}");
    assert!(stderr.contains("codegen: emit"), "{stderr}");

    let (csv_out, _) = ok(&["query", "--query", "q6", "--data", d, "--backend", "interpreter", "--format", "csv"]);
    let (fbc_out, _) = ok(&["query", "--query", "q6", "--data", d, "--format", "csv"]);
    let (a, b) = (parse_csv(&csv_out), parse_csv(&fbc_out));
    assert!(a.iter().flatten().zip(b.iter().flatten()).all(|(x, y)| same_cell(x, y)));
}

#[test]
fn sql_text_and_explain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    gen(dir.path(), "fbc");
    let (out, _) = ok(&["query", "--sql", "select count(*) as n from nation", "--data", d, "--format", "csv"]);
    assert_eq!(parse_csv(&out)[1], vec!["25".to_string()]);
    let (plan, _) = ok(&["query", "--query", "q6", "--data", d, "--explain"]);
    assert!(plan.contains("Scan lineitem") && plan.contains("loop 0"), "{plan}");
}

#[test]
fn unknown_query_is_actionable() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "fbc");
    let out = flarelite(&["query", "--query", "q2", "--data", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("q2") && err.contains("q6"), "{err}");

    let empty = tempfile::tempdir().unwrap();
    let out = flarelite(&["query", "--query", "q6", "--data", empty.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("flarelite gen"));
}

#[test]
fn bench_writes_a_cost_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    gen(dir.path(), "fbc");
    let report = dir.path().join("bench.jsonl");
    let (_, stderr) = ok(&[
        "bench",
        "--data",
        d,
        "--queries",
        "q6,q12",
        "--threads",
        "1,2",
        "--repeat",
        "5",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(stderr.contains("COST"), "{stderr}");
    let records: Vec<serde_json::Value> =
        std::fs::read_to_string(&report).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    for kind in ["load", "codegen", "exec", "cost"] {
        assert!(records.iter().any(|r| r["record"] == kind), "no {kind} record");
    }
    let volcano_cost: Vec<_> = records.iter().filter(|r| r["record"] == "cost" && r["system"] == "volcano").collect();
    assert_eq!(volcano_cost.len(), 4, "two queries in two modes");
    assert!(volcano_cost.iter().all(|r| r["note"].as_str().unwrap().contains("single-threaded")));
    let cold: Vec<_> =
        records.iter().filter(|r| r["record"] == "exec" && r["mode"] == "cold" && r["query"] == "q6").collect();
    assert!(cold.iter().filter(|r| r["backend"] == "native").all(|r| r["columns_read"] == 4));

    let out = flarelite(&["bench", "--data", d, "--repeat", "2", "--report", report.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("repeat"));
}
