//! The `tabmia` binary: verbs, flags, output files and exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_tabmia");

const SMALL: &str = r#"
[dataset]
quasi_identifiers = ["sex", "region", "age_band"]

[dataset.synthetic]
rows = 400
seed = 2
single_outs = 6

[audit]
kinds = ["naive_bayes"]
families = ["metric_correctness", "metric_loss", "rmia_offline"]
out = "out"

[attacks]
offline_references = 4

[transfer]
targets = ["naive_bayes", "decision_tree"]
surrogates = ["naive_bayes", "decision_tree"]
families = ["metric_loss"]
"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn setup(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("audit.toml"), config).unwrap();
    dir
}

#[test]
fn audit_writes_report_files() {
    let dir = setup(SMALL);
    let out = run(dir.path(), &["audit", "--config", "audit.toml"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let o = dir.path().join("out");
    for f in [
        "report.json",
        "metrics.csv",
        "partition_s0.json",
        "scores_central_weak_naive_bayes_metric_loss_s0.csv",
        "roc_central_weak_naive_bayes_metric_loss_s0.csv",
        "scores_central_weak_naive_bayes_metric_correctness_s0.csv",
    ] {
        assert!(o.join(f).exists(), "missing {f}");
    }
    // binary scores: advantage only, no curve
    assert!(!o.join("roc_central_weak_naive_bayes_metric_correctness_s0.csv").exists());
    let metrics = fs::read_to_string(o.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 4);
    assert!(String::from_utf8_lossy(&out.stdout).contains("metric_loss"));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(o.join("report.json")).unwrap()).unwrap();
    assert!(v["single_outs"]["n_single_outs"].as_u64().unwrap() >= 6);

    let report = run(dir.path(), &["report", "--out", "out"]);
    assert_eq!(report.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&report.stdout).contains("rmia_offline"));
}

#[test]
fn flags_override_the_config() {
    let dir = setup(SMALL);
    let out = run(
        dir.path(),
        &["audit", "--config", "audit.toml", "--seed", "9", "--out", "elsewhere", "--family", "metric_loss", "--regime", "central_weak", "--jobs", "1"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("elsewhere/report.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["config"]["seeds"]["master"], 9);
    assert_eq!(v["cells"].as_array().unwrap().len(), 1);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn config_errors_exit_with_2() {
    let dir = setup("[dataset]\nbogus = 1\n");
    assert_eq!(run(dir.path(), &["audit", "--config", "audit.toml"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["audit", "--config", "missing.toml"]).status.code(), Some(2));
    let dir = setup(SMALL);
    let out = run(dir.path(), &["audit", "--config", "audit.toml", "--family", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(dir.path(), &["audit", "--config", "audit.toml", "--regime", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn partial_failures_exit_with_3() {
    // decision trees have no federated training scheme
    let cfg = SMALL.replace(r#"kinds = ["naive_bayes"]"#, r#"kinds = ["decision_tree"]"#)
        .replace("[audit]", "[audit]\nregimes = [\"central_weak\", \"federated\"]");
    let dir = setup(&cfg);
    let out = run(dir.path(), &["audit", "--config", "audit.toml"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(v["failures"], 3);
}

#[test]
fn transfer_and_singleouts_verbs() {
    let dir = setup(SMALL);
    let out = run(dir.path(), &["transfer", "--config", "audit.toml"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/transfer_metric_loss.csv")).unwrap();
    assert!(csv.starts_with("target,surrogate,baseline,auc"));
    assert_eq!(csv.lines().count(), 5);
    assert!(dir.path().join("out/transfer.json").exists());

    let out = run(dir.path(), &["singleouts", "--config", "audit.toml", "--out", "so"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("so/singleouts.csv").exists());
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("so/singleouts.json")).unwrap()).unwrap();
    assert!(v["n_single_outs"].as_u64().unwrap() >= 6);
}

#[test]
fn ingest_prints_schema_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("d.csv"), "a,b,label\n1,x,0\n2,y,1\n3,x,\n4,y,1\n").unwrap();
    let out = run(dir.path(), &["ingest", "d.csv", "--label", "label", "--out", "m"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("3 rows"), "{stdout}");
    assert!(stdout.contains("categorical (2 values) [label]"), "{stdout}");
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("m/dataset_manifest.json")).unwrap()).unwrap();
    assert_eq!(m["summary"]["dropped_rows"], 1);
    assert_eq!(m["fingerprint"].as_str().unwrap().len(), 16);
}

#[test]
fn repeated_audits_are_byte_identical() {
    let dir = setup(SMALL);
    let files = ["report.json", "metrics.csv", "scores_central_weak_naive_bayes_rmia_offline_s0.csv"];
    let first = run(dir.path(), &["audit", "--config", "audit.toml", "--jobs", "1"]);
    assert_eq!(first.status.code(), Some(0));
    let before: Vec<Vec<u8>> = files.iter().map(|f| fs::read(dir.path().join("out").join(f)).unwrap()).collect();
    let second = run(dir.path(), &["audit", "--config", "audit.toml", "--jobs", "3"]);
    assert_eq!(second.status.code(), Some(0));
    for (f, b) in files.iter().zip(&before) {
        assert!(fs::read(dir.path().join("out").join(f)).unwrap() == *b, "{f} differs");
    }
}
