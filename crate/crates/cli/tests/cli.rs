use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn dafs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dafs")).args(args).output().expect("binary runs")
}

fn tiny_spec() -> Value {
    json!({
        "task": "classification",
        "domains": [
            {"name": "alpha", "mixture": [0.8, 0.2]},
            {"name": "beta", "mixture": [0.6, 0.4]},
            {"name": "gamma", "mixture": [0.1, 0.9]},
        ],
        "divergence": 0.6,
        "sizes": {"pool": 120, "unlabeled": 60, "test": 60},
        "vocab_size": 300,
    })
}

fn write_config(dir: &Path, corpora: Value, methods: &[&str], step: usize) -> String {
    let cfg = json!({
        "task": "classification",
        "corpora": corpora,
        "methods": methods,
        "targets": ["alpha"],
        "seeds": [0],
        "seed_size": 20,
        "step": step,
        "iterations": 2,
        "train": {"epochs": 2, "hidden_dim": 16},
        "features": {"hash_bits": 10},
        "discriminator_epochs": 1,
        "output_dir": dir.join("results"),
    });
    let path = dir.join("config.json");
    fs::write(&path, cfg.to_string()).expect("write config");
    path.to_string_lossy().into_owned()
}

#[test]
fn gen_then_run_then_report() {
    let dir = tempfile::tempdir().expect("tempdir");
    let spec = dir.path().join("spec.json");
    fs::write(&spec, tiny_spec().to_string()).expect("write spec");
    let data = dir.path().join("data");
    let out = dafs(&["gen", "--spec", spec.to_str().unwrap(), "--out", data.to_str().unwrap(), "--seed", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let files: Vec<_> = ["alpha", "beta", "gamma"].iter().map(|d| data.join(format!("{d}.jsonl"))).collect();
    assert!(files.iter().all(|f| f.exists()));

    let config = write_config(dir.path(), json!({"jsonl": files}), &["Vanilla", "Certainty"], 20);
    let out = dafs(&["run", "--config", &config]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("2 runs executed"));

    // A second invocation resumes everything.
    let out = dafs(&["run", "--config", &config]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 runs executed, 2 resumed"));

    let results = dir.path().join("results");
    let out = dafs(&["report", "--results", results.to_str().unwrap(), "--per-iteration"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("Certainty"));
    assert!(results.join("curves").join("alpha.csv").exists());
}

#[test]
fn unknown_preset_exits_with_one() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = dafs(&["gen", "--spec", "nonexistent-preset", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invalid_config_exits_with_one() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"task": "classification"}"#).expect("write");
    assert_eq!(dafs(&["run", "--config", path.to_str().unwrap()]).status.code(), Some(1));

    let config = write_config(dir.path(), json!({"synthetic": {"spec": tiny_spec(), "seed": 0}}), &["NoSuchMethod"], 20);
    assert_eq!(dafs(&["run", "--config", &config]).status.code(), Some(1));
}

#[test]
fn failed_runs_exit_with_two() {
    let dir = tempfile::tempdir().expect("tempdir");
    // 20 + 2 x 60 labels fit the two-source pool but not a single source.
    let corpora = json!({"synthetic": {"spec": tiny_spec(), "seed": 0}});
    let config = write_config(dir.path(), corpora, &["Vanilla", "TAPAD"], 60);
    let out = dafs(&["run", "--config", &config]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("1 failed"), "{stdout}");
}
