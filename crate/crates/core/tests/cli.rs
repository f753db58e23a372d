mod common;

use std::path::Path;
use std::process::{Command, Output};

fn qualproj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qualproj"))
        .args(args)
        .env_remove("QUALPROJ_DATA_DIR")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_figure3_writes_curves_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("out");
    common::write_fixture(&data);
    let cfg = common::fixture_config(&data, &out);
    let o = qualproj(&["run-figure3", "--config", s(&cfg)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for v in ["plain", "biased", "biased_dither"] {
        let text = std::fs::read_to_string(out.join(format!("curve_{v}.csv"))).unwrap();
        assert!(text.starts_with("iteration,error\n1,"));
        assert_eq!(text.lines().count(), 9);
    }
    let fig = std::fs::read_to_string(out.join("figure3.csv")).unwrap();
    assert!(fig.starts_with("iteration,plain,biased,biased_dither\n"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    for v in ["plain", "biased", "biased_dither"] {
        assert_eq!(summary[v]["iterations"], 8);
        let e = summary[v]["final_error"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&e));
    }
    assert!(String::from_utf8_lossy(&o.stdout).contains("final test error"));
}

#[test]
fn cached_rerun_matches_fresh_run() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("out");
    common::write_fixture(&data);
    let cfg = common::fixture_config(&data, &out);
    assert!(qualproj(&["run-figure3", "--config", s(&cfg)])
        .status
        .success());
    let first = std::fs::read(out.join("figure3.csv")).unwrap();
    assert!(out.join("cache/biased_dither/bank/manifest.json").exists());
    assert!(qualproj(&["run-figure3", "--config", s(&cfg)])
        .status
        .success());
    assert_eq!(std::fs::read(out.join("figure3.csv")).unwrap(), first);
    let fresh = tmp.path().join("fresh");
    assert!(qualproj(&[
        "run-figure3",
        "--config",
        s(&cfg),
        "--no-cache",
        "--output-dir",
        s(&fresh)
    ])
    .status
    .success());
    assert_eq!(std::fs::read(fresh.join("figure3.csv")).unwrap(), first);
    assert!(!fresh.join("cache").exists());
}

#[test]
fn staged_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("out");
    common::write_fixture(&data);
    let cfg = common::fixture_config(&data, &out);
    let bank = tmp.path().join("bank");
    let proj = tmp.path().join("proj");
    let o = qualproj(&[
        "train-bank",
        "--config",
        s(&cfg),
        "--variant",
        "biased",
        "--out",
        s(&bank),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(bank.join("projector_000.json").exists());
    let o = qualproj(&[
        "project",
        "--config",
        s(&cfg),
        "--variant",
        "biased",
        "--bank",
        s(&bank),
        "--out",
        s(&proj),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = qualproj(&[
        "train-classifier",
        "--config",
        s(&cfg),
        "--train",
        s(&proj.join("train.qpds")),
        "--test",
        s(&proj.join("test.qpds")),
        "--name",
        "biased",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let staged = std::fs::read_to_string(out.join("curve_biased.csv")).unwrap();

    let full = tmp.path().join("full");
    assert!(
        qualproj(&["run-figure3", "--config", s(&cfg), "--output-dir", s(&full)])
            .status
            .success()
    );
    assert_eq!(
        std::fs::read_to_string(full.join("curve_biased.csv")).unwrap(),
        staged
    );
}

#[test]
fn gradcheck_passes() {
    let o = qualproj(&["gradcheck"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("max relative error"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = qualproj(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert!(o.stdout.is_empty());
}

#[test]
fn missing_data_is_a_one_line_pipeline_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qualproj(&[
        "run-figure3",
        "--data-dir",
        s(&tmp.path().join("none")),
        "--output-dir",
        s(tmp.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("data_batch_1.bin"));
}

#[test]
fn data_dir_env_var_is_the_default_root() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    common::write_fixture(&data);
    let out = tmp.path().join("out");
    let cfg = common::fixture_config(&data, &out);
    let mut doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    doc["data"].as_object_mut().unwrap().remove("data_dir");
    std::fs::write(&cfg, doc.to_string()).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_qualproj"))
        .args(["run-figure3", "--config", s(&cfg)])
        .env("QUALPROJ_DATA_DIR", &data)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
