use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dpaudit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpaudit"))
        .args(args)
        .env_remove("DPAUDIT_SEED")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

#[test]
fn buggy_scaled_count_fails_at_call_one() {
    let o = dpaudit(&["audit", "--pipeline", "scaled_count", "--variant", "buggy", "--adjacency", "add-remove", "--seed", "7"]);
    assert_eq!(code(&o), 1);
    let r = json(&o);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["passed"], false);
    let v = &r["record_replay"]["violations"][0];
    assert_eq!(v["kind"], "SensitivityViolation");
    assert_eq!(v["call_index"], 1);
}

#[test]
fn fixed_scaled_count_passes() {
    let o = dpaudit(&["audit", "--pipeline", "scaled_count", "--variant", "fixed", "--seed", "7"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&dpaudit(&["audit", "--pipeline", "scaled_count"])), 2);
    assert_eq!(code(&dpaudit(&["audit", "--pipeline", "no_such_case", "--seed", "1"])), 2);
    assert_eq!(code(&dpaudit(&["audit", "--pipeline", "scaled_count", "--seed", "1", "--mode", "distributional"])), 2);
    assert_eq!(code(&dpaudit(&["audit", "--pipeline", "scaled_count", "--seed", "1", "--epsilon", "-1"])), 2);
    assert_eq!(code(&dpaudit(&["audit", "--pipeline", "scaled_count", "--seed", "x"])), 2);
    assert_eq!(code(&dpaudit(&["bogus"])), 2);
    assert_eq!(code(&dpaudit(&["trace-dump", "/definitely/not/here.json"])), 2);
}

#[test]
fn seed_from_environment_and_flag_wins() {
    let run = |flag: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_dpaudit"));
        c.args(["audit", "--pipeline", "scaled_count", "--variant", "fixed"]).env("DPAUDIT_SEED", "11");
        if let Some(s) = flag {
            c.args(["--seed", s]);
        }
        json(&c.output().unwrap())["seed"].clone()
    };
    assert_eq!(run(None), 11);
    assert_eq!(run(Some("3")), 3);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let args = ["audit", "--pipeline", "double_spend", "--variant", "fixed", "--seed", "5", "--mode", "full", "--samples", "5000"];
    let a = dpaudit(&args);
    let b = dpaudit(&args);
    assert!(matches!(code(&a), 0 | 1));
    assert_eq!(a.stdout, b.stdout);
    let r = json(&a);
    assert!(r["distributional"]["eps_hat"].is_number());
    assert!(r["blackbox"]["eps_lower"].is_number());
}

#[test]
fn text_report_has_one_line_per_violation() {
    let o = dpaudit(&["audit", "--pipeline", "unguarded_inputs", "--variant", "buggy", "--seed", "1", "--format", "text"]);
    assert_eq!(code(&o), 1);
    let text = String::from_utf8(o.stdout).unwrap();
    let lines = text.lines().filter(|l| l.trim_start().starts_with("[call")).count();
    assert_eq!(lines, 6, "{text}");
    assert!(text.contains("measured inf vs declared 1"), "{text}");
}

#[test]
fn matrix_passes_and_fault_injection_breaks_it() {
    let o = dpaudit(&["corpus-matrix", "--format", "json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let m = json(&o);
    assert_eq!(m["schema_version"], 1);
    assert_eq!(m["rows"].as_array().unwrap().len(), 20);
    let again: Value = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
    assert_eq!(again, m);

    let o = dpaudit(&["corpus-matrix", "--record-replay-only", "--disable-check", "invariance"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn cases_manifest_lists_both_variants() {
    let o = dpaudit(&["cases"]);
    assert_eq!(code(&o), 0);
    let m = json(&o);
    let entries = m.as_array().unwrap();
    assert_eq!(entries.len(), 20);
    assert!(entries.iter().all(|e| e["variant"] == "fixed" || e["expected_violation"].is_string()));
}

fn record(dir: &Path, pipeline: &str, variant: &str) -> (String, String) {
    let rec = dir.join(format!("{pipeline}-{variant}.json"));
    let rep = dir.join(format!("{pipeline}-{variant}-replay.json"));
    let o = dpaudit(&[
        "record",
        "--pipeline",
        pipeline,
        "--variant",
        variant,
        "--seed",
        "2",
        "--out",
        rec.to_str().unwrap(),
        "--replay-out",
        rep.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    (rec.to_str().unwrap().to_owned(), rep.to_str().unwrap().to_owned())
}

#[test]
fn trace_dump_rows_and_stop_reason() {
    let dir = tempfile::tempdir().unwrap();
    let (rec, _) = record(dir.path(), "double_spend", "fixed");
    let o = dpaudit(&["trace-dump", &rec]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| l.trim_start().starts_with(char::is_numeric)).collect();
    assert_eq!(rows.len(), 2, "{text}");

    let (_, rep) = record(dir.path(), "privbayes_lite", "buggy");
    let text = String::from_utf8(dpaudit(&["trace-dump", &rep]).stdout).unwrap();
    assert!(text.contains("stopped at call 3: EqualityMismatch"), "{text}");
}

#[test]
fn trace_dump_json_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let (rec, _) = record(dir.path(), "odometer", "buggy");
    let bytes = std::fs::read(&rec).unwrap();
    let o = dpaudit(&["trace-dump", &rec, "--format", "json"]);
    assert_eq!(code(&o), 0);
    assert_eq!(o.stdout, bytes);
    let again = dir.path().join("again.json");
    std::fs::write(&again, &o.stdout).unwrap();
    assert_eq!(dpaudit(&["trace-dump", again.to_str().unwrap(), "--format", "json"]).stdout, bytes);
}

#[test]
fn malformed_trace_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, "{\"version\": 1, \"entries\": [").unwrap();
    assert_eq!(code(&dpaudit(&["trace-dump", p.to_str().unwrap()])), 2);
}
