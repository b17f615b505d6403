use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn qracle(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qracle"))
        .current_dir(dir)
        .env_remove("QRACLE_SEED")
        .args(args)
        .output()
        .expect("spawn qracle")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = qracle(dir, args);
    assert!(
        out.status.success(),
        "qracle {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL: &[&str] = &["--gcn-hidden", "8", "--gat-hidden", "8", "--mlp-hidden", "8", "--heads", "2"];

fn small_dataset(dir: &Path) {
    ok(dir, &["gen-data", "--app", "heisenberg", "--count", "10", "--steps", "40", "--seed", "3", "--out", "d.jsonl"]);
    ok(dir, &["split", "--data", "d.jsonl", "--out", "split.json", "--seed", "3"]);
}

fn train_small(dir: &Path, out: &str, epochs: &str, extra: &[&str]) {
    let mut args = vec!["train", "--data", "d.jsonl", "--split", "split.json", "--out", out, "--epochs", epochs];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    ok(dir, &args);
}

#[test]
fn gen_data_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    for out in ["a.jsonl", "b.jsonl"] {
        ok(d, &["gen-data", "--app", "heisenberg", "--count", "10", "--steps", "30", "--seed", "9", "--out", out]);
    }
    let a = std::fs::read(d.join("a.jsonl")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b.jsonl")).unwrap());
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().contains("qracle-v1"));
    assert_eq!(lines.count(), 10);
    assert!(d.join("a.jsonl.config.json").exists());
}

#[test]
fn unknown_application_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qracle(tmp.path(), &["gen-data", "--app", "lithium", "--count", "2", "--out", "x.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("x.jsonl").exists());
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(qracle(tmp.path(), &["train", "--bogus"]).status.code(), Some(2));
}

#[test]
fn missing_dataset_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qracle(tmp.path(), &["split", "--data", "nope.jsonl", "--out", "s.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn config_file_supplies_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("q.conf"), "# desk run\napp = heisenberg\ncount = 4\nsteps = 20\nseed = 5\nout = c.jsonl\n").unwrap();
    ok(d, &["gen-data", "--config", "q.conf"]);
    ok(d, &["gen-data", "--app", "heisenberg", "--count", "4", "--steps", "20", "--seed", "5", "--out", "f.jsonl"]);
    assert_eq!(std::fs::read(d.join("c.jsonl")).unwrap(), std::fs::read(d.join("f.jsonl")).unwrap());
}

#[test]
fn train_writes_report_and_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_dataset(d);
    let split = json(d.join("split.json"));
    assert_eq!(split["train_indices"].as_array().unwrap().len(), 7);
    assert_eq!(split["test_indices"].as_array().unwrap().len(), 3);

    train_small(d, "m", "1", &["--seed", "3"]);
    let report = json(d.join("m/report.json"));
    assert_eq!(report["epochs"].as_array().unwrap().len(), 1);
    assert!(report["initial_val_mse"].as_f64().unwrap().is_finite());
    assert!(d.join("m/model").exists());

    let init = ok(d, &["init", "--model", "m/model", "--data", "d.jsonl", "--index", "0"]);
    let theta: Vec<f64> = serde_json::from_str(init.trim()).unwrap();
    assert_eq!(theta.len(), 8);
}

#[test]
fn training_is_byte_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_dataset(d);
    train_small(d, "a", "2", &["--seed", "1"]);
    train_small(d, "b", "2", &["--seed", "1"]);
    let files = |root: PathBuf| {
        let mut v: Vec<PathBuf> = walk(&root).into_iter().filter(|p| !p.ends_with("config.json")).collect();
        v.sort();
        v.into_iter().map(|p| (p.strip_prefix(&root).unwrap().to_owned(), std::fs::read(&p).unwrap())).collect::<Vec<_>>()
    };
    let (a, b) = (files(d.join("a")), files(d.join("b")));
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn resume_with_zero_epochs_keeps_validation_loss() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_dataset(d);
    train_small(d, "m", "3", &["--seed", "2"]);
    ok(d, &["train", "--data", "d.jsonl", "--split", "split.json", "--out", "r", "--epochs", "0", "--resume", "m/model"]);
    let before = json(d.join("m/report.json"))["best_score"].as_f64().unwrap();
    let after = json(d.join("r/report.json"))["initial_val_mse"].as_f64().unwrap();
    assert!((before - after).abs() <= 1e-12, "{before} vs {after}");
}

#[test]
fn eval_reports_both_schemes_and_deltas() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_dataset(d);
    train_small(d, "m", "1", &["--seed", "3"]);
    ok(d, &["eval", "--model", "m/model", "--data", "d.jsonl", "--split", "split.json", "--steps", "30", "--out", "runs"]);
    let runs: Vec<PathBuf> = std::fs::read_dir(d.join("runs")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(runs.len(), 1);
    let run = &runs[0];
    assert!(run.file_name().unwrap().to_str().unwrap().ends_with("_seed0"));
    let csv = std::fs::read_to_string(run.join("report.csv")).unwrap();
    for scheme in ["random", "gnn", "delta"] {
        assert!(csv.lines().any(|l| l.starts_with(scheme)), "no {scheme} row in\n{csv}");
    }
    let results = json(run.join("results.json"));
    for r in results.as_array().unwrap() {
        assert_eq!(r["instances"].as_array().unwrap().len(), 3);
    }
    let cmp = ok(d, &["compare", run.to_str().unwrap()]);
    assert!(cmp.contains("/1"));
}

#[test]
fn random_only_eval_needs_no_model() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_dataset(d);
    ok(d, &["eval", "--data", "d.jsonl", "--split", "split.json", "--schemes", "random", "--steps", "20"]);
    let out = qracle(d, &["eval", "--data", "d.jsonl", "--split", "split.json", "--schemes", "gnn"]);
    assert_eq!(out.status.code(), Some(2));
}
