//! End-to-end tests of the `mub` binary: sweep/resume/export round trips,
//! config-file handling, the memory-budget override, and error reporting.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mub() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mub"))
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn mub")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "expected success\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn assert_fails_with(out: &Output, needle: &str) {
    assert!(!out.status.success(), "expected failure, got success");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(needle), "stderr missing {needle:?}: {stderr}");
}

fn line_count(path: &Path) -> usize {
    fs::read_to_string(path)
        .expect("read store")
        .lines()
        .filter(|l| !l.trim().is_empty())
        .count()
}

/// Shared sweep flags: a 2-point random grid over the one-parameter family
/// with the fast multistart engine.
fn sweep_args(store: &Path) -> Vec<String> {
    [
        "sweep", "--family", "D", "--grid", "random", "--n", "2", "--seed", "7", "--engine",
        "numcheck", "--starts", "500", "--mode", "approx", "--digits", "5",
    ]
    .iter()
    .map(|s| s.to_string())
    .chain(["--store".to_string(), store.display().to_string()])
    .collect()
}

#[test]
fn sweep_resumes_and_exports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let store_a = dir.path().join("a.jsonl");
    let store_b = dir.path().join("b.jsonl");

    // Interrupted run: one point, then resume, then a third pass that finds
    // nothing left to do.
    let out = run(mub().args(sweep_args(&store_a)).args(["--limit", "1"]));
    assert_ok(&out);
    assert_eq!(line_count(&store_a), 1);

    let out = run(mub().args(sweep_args(&store_a)));
    assert_ok(&out);
    assert_eq!(line_count(&store_a), 2);

    let out = run(mub().args(sweep_args(&store_a)));
    assert_ok(&out);
    assert_eq!(line_count(&store_a), 2, "resume must not recompute stored points");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("covers 2 of 2"), "unexpected summary: {stdout}");

    // Uninterrupted run with two workers into a fresh store.
    let out = run(mub().args(sweep_args(&store_b)).args(["--jobs", "2"]));
    assert_ok(&out);
    assert_eq!(line_count(&store_b), 2);

    // Both stores export to byte-identical CSV.
    let csv_a = dir.path().join("a.csv");
    let csv_b = dir.path().join("b.csv");
    for (store, csv) in [(&store_a, &csv_a), (&store_b, &csv_b)] {
        let out = run(mub()
            .arg("export")
            .arg(store)
            .args(["--format", "csv", "--out"])
            .arg(csv));
        assert_ok(&out);
    }
    let bytes_a = fs::read(&csv_a).unwrap();
    assert_eq!(bytes_a, fs::read(&csv_b).unwrap(), "resumed and one-shot exports differ");

    let text = String::from_utf8(bytes_a).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "family,param1,param2,mode,engine,n_v,n_t,n_p,four_bases_found,error"
    );
    assert_eq!(lines.count(), 2);

    // JSONL export carries one full record per line.
    let jsonl = dir.path().join("a.export.jsonl");
    let out = run(mub()
        .arg("export")
        .arg(&store_a)
        .args(["--format", "jsonl", "--out"])
        .arg(&jsonl));
    assert_ok(&out);
    let text = fs::read_to_string(&jsonl).unwrap();
    assert_eq!(text.lines().count(), 2);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).expect("record line parses");
        assert_eq!(v["family"], "dita");
        assert_eq!(v["engine"], "numcheck");
    }
}

#[test]
fn config_file_mirrors_flags_and_explicit_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let store_c = dir.path().join("c.jsonl");
    let cfg_path = dir.path().join("run.json");
    let cfg = serde_json::json!({
        "family": "D",
        "grid": "random",
        "n": 1,
        "seed": 7,
        "engine": "numcheck",
        "starts": 500,
        "mode": "approx",
        "digits": 5,
        "jobs": 1,
        "store": store_c.to_str().unwrap(),
    });
    fs::write(&cfg_path, cfg.to_string()).unwrap();

    let out = run(mub().args(["sweep", "--config"]).arg(&cfg_path));
    assert_ok(&out);
    assert_eq!(line_count(&store_c), 1);

    // An explicit flag beats the config value: same run, different store.
    let store_d = dir.path().join("d.jsonl");
    let out = run(mub()
        .args(["sweep", "--config"])
        .arg(&cfg_path)
        .arg("--store")
        .arg(&store_d));
    assert_ok(&out);
    assert_eq!(line_count(&store_d), 1);
    assert_eq!(line_count(&store_c), 1, "config store must be untouched");

    // Typos in config keys are rejected, not ignored.
    let bad_path = dir.path().join("bad.json");
    fs::write(&bad_path, r#"{"famly": "D"}"#).unwrap();
    let out = run(mub().args(["sweep", "--config"]).arg(&bad_path));
    assert_fails_with(&out, "unknown config key");
}

#[test]
fn point_emits_record_and_env_budget_overrides_flag() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("p.jsonl");

    // A healthy multistart census prints the stored record as JSON.
    let out = run(mub()
        .args(["point", "--family", "D", "--params", "1/8", "--engine", "numcheck", "--store"])
        .arg(&store));
    assert_ok(&out);
    let v: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stdout).trim()).expect("record JSON");
    assert_eq!(v["family"], "dita");
    assert!(v["error"].is_null(), "unexpected error: {}", v["error"]);
    assert!(v["n_v"].as_u64().unwrap() >= 1, "no vectors found: {v}");
    assert_eq!(line_count(&store), 1);

    // MUB_BUDGET_MEM beats --mem-budget: a 1000-byte budget aborts the
    // certified engine, recorded as a point error with exit status 0.
    let out = run(mub()
        .args(["point", "--family", "D", "--params", "1/8", "--mem-budget", "1G", "--store"])
        .arg(&store)
        .env("MUB_BUDGET_MEM", "1000"));
    assert_ok(&out);
    let v: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stdout).trim()).expect("record JSON");
    assert!(
        v["error"].as_str().unwrap_or("").starts_with("ResourceBudgetExceeded"),
        "expected budget abort, got {v}"
    );
}

#[test]
fn bad_inputs_are_reported_as_errors() {
    let dir = tempfile::tempdir().unwrap();

    // Empty store: nothing to export.
    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let out = run(mub()
        .arg("export")
        .arg(&empty)
        .args(["--format", "csv", "--out"])
        .arg(dir.path().join("out.csv")));
    assert_fails_with(&out, "no records");

    // Missing store file.
    let out = run(mub()
        .arg("export")
        .arg(dir.path().join("missing.jsonl"))
        .args(["--format", "csv", "--out"])
        .arg(dir.path().join("out.csv")));
    assert_fails_with(&out, "io failure");

    let store = dir.path().join("s.jsonl");
    let store_s = store.display().to_string();

    let out = run(mub().args([
        "sweep", "--family", "Q", "--grid", "gamma_D", "--store", &store_s,
    ]));
    assert_fails_with(&out, "unknown family");

    let out = run(mub().args([
        "sweep", "--family", "D", "--grid", "random", "--store", &store_s,
    ]));
    assert_fails_with(&out, "needs --n");

    let out = run(mub().args([
        "sweep", "--family", "D", "--grid", "gamma_D", "--engine", "magic", "--store", &store_s,
    ]));
    assert_fails_with(&out, "unknown engine");

    let out = run(mub().args(["sweep", "--family", "D", "--grid", "gamma_D"]));
    assert_fails_with(&out, "missing --store");
}
