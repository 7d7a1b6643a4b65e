use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn survkit(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_survkit"))
        .args(args)
        .current_dir(dir)
        .env_remove("SURVKIT_OUT")
        .output()
        .expect("binary runs")
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

/// A small two-covariate dataset with a clear effect of `dose`.
fn toy_data(dir: &Path) -> PathBuf {
    let mut csv = String::from("time,status,dose,noise\n");
    for i in 0..40 {
        let dose = (i % 5) as f64;
        let time = 20.0 / (1.0 + dose) + (i % 7) as f64 * 0.3;
        let status = u8::from(i % 4 != 0);
        csv.push_str(&format!("{time},{status},{dose},{}\n", (i * 37 % 11) as f64 / 10.0));
    }
    let path = dir.join("toy.csv");
    std::fs::write(&path, csv).unwrap();
    path
}

const FAST: [&str; 8] = ["--bootstrap", "5", "--folds", "3", "--calibration-bootstrap", "20", "--horizons", "3,6"];

#[test]
fn fixed_lambda_run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy_data(dir.path());
    let mut args = vec!["run", "--input", data.to_str().unwrap(), "--out", "out", "--lambda", "0.01"];
    args.extend(FAST);
    let out = survkit(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let root = dir.path().join("out");
    let r = report(&root);
    assert_eq!(r["status"], "ok");
    assert_eq!(r["completed_stages"].as_array().unwrap().len(), 4);
    assert_eq!(r["model"]["lambda"], 0.01);
    assert!(r["model"]["selected"].as_array().unwrap().iter().any(|s| s == "dose"));
    let manifest = r["manifest"].as_array().unwrap();
    for f in ["km.csv", "model.json", "path.csv", "pec.csv", "km.svg", "pec.svg", "path.svg"] {
        assert!(manifest.iter().any(|e| e["file"] == f), "{f} missing from manifest");
    }
    for e in manifest {
        let bytes = std::fs::read(root.join(e["file"].as_str().unwrap())).unwrap();
        assert_eq!(e["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy_data(dir.path());
    let no_input = survkit(&["fit", "--out", "o1"], dir.path());
    assert_eq!(no_input.status.code(), Some(1));

    let missing = survkit(&["fit", "--input", "nope.csv", "--out", "o2"], dir.path());
    assert_eq!(missing.status.code(), Some(2));

    let bad = survkit(&["fit", "--input", data.to_str().unwrap(), "--folds", "1", "--out", "o3"], dir.path());
    assert_eq!(bad.status.code(), Some(1));

    std::fs::write(dir.path().join("bad.toml"), "[model]\nunknown_key = 3\n").unwrap();
    let unknown = survkit(&["fit", "--config", "bad.toml", "--input", data.to_str().unwrap()], dir.path());
    assert_eq!(unknown.status.code(), Some(1));
}

#[test]
fn failure_leaves_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("time,status,a,b\n");
    for i in 0..10 {
        csv.push_str(&format!("{},0,{},{}\n", i + 1, i % 3, i % 2));
    }
    std::fs::write(dir.path().join("censored.csv"), csv).unwrap();
    let out = survkit(&["fit", "--input", "censored.csv", "--out", "o"], dir.path());
    assert!(!out.status.success());
    let r = report(&dir.path().join("o"));
    assert_eq!(r["status"], "failed");
    assert_eq!(r["completed_stages"], serde_json::json!(["preprocess"]));
    assert!(r["failed_stage"].as_str().is_some());
    assert!(r["manifest"].as_array().unwrap().iter().any(|e| e["file"] == "preprocessed.csv"));
}

#[test]
fn output_directory_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy_data(dir.path());
    let out = Command::new(env!("CARGO_BIN_EXE_survkit"))
        .args(["preprocess", "--input", data.to_str().unwrap()])
        .current_dir(dir.path())
        .env("SURVKIT_OUT", dir.path().join("from-env"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("from-env/report.json").exists());
}

#[test]
fn staged_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy_data(dir.path());
    for name in ["a", "b"] {
        let mut args = vec!["validate", "--input", data.to_str().unwrap(), "--out", name, "--seed", "11"];
        args.extend(FAST);
        assert!(survkit(&args, dir.path()).status.success());
    }
    let (a, b) = (report(&dir.path().join("a")), report(&dir.path().join("b")));
    assert_eq!(a["manifest"], b["manifest"]);
    assert_eq!(a["metrics"], b["metrics"]);
}

#[test]
fn report_subcommand_rerenders_plots() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy_data(dir.path());
    assert!(survkit(&["preprocess", "--input", data.to_str().unwrap(), "--out", "o"], dir.path())
        .status
        .success());
    let root = dir.path().join("o");
    assert!(!root.join("km.svg").exists());

    let ok = survkit(&["report", "--out", "o", "--plots", "km"], dir.path());
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(std::fs::read_to_string(root.join("km.svg")).unwrap().starts_with("<svg"));
    assert!(report(&root)["manifest"].as_array().unwrap().iter().any(|e| e["file"] == "km.svg"));

    let missing = survkit(&["report", "--out", "o", "--plots", "pec"], dir.path());
    assert_eq!(missing.status.code(), Some(1));

    let no_run = survkit(&["report", "--out", "elsewhere"], dir.path());
    assert_eq!(no_run.status.code(), Some(2));
}
