use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fuzzfuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fuzzfuse"))
        .args(args)
        .env_remove("FUZZFUSE_SEED")
        .output()
        .expect("binary runs")
}

fn synth(dir: &Path, samples: &str) {
    let out = fuzzfuse(&[
        "synth",
        "--samples",
        samples,
        "--seed",
        "3",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

fn json(p: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn help_and_usage_exit_codes() {
    assert_eq!(fuzzfuse(&["--help"]).status.code(), Some(0));
    assert_eq!(fuzzfuse(&["fuse", "--no-such-flag"]).status.code(), Some(2));
}

#[test]
fn data_errors_exit_one_with_error_name() {
    let dir = tempfile::tempdir().unwrap();
    let bad = path(dir.path(), "bad.csv");
    fs::write(&bad, "sample_id,label,c0,c1\na,0,0.9,0.9\n").unwrap();
    let out = fuzzfuse(&["fuse", "--scores", &bad, "--out", &path(dir.path(), "p.csv")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("RowSumViolation"));

    let out = fuzzfuse(&["fuse", "--scores", &path(dir.path(), "missing.csv"), "--out", &bad]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn synth_writes_manifest_and_provenance() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "50");
    for f in ["model_0.csv", "model_1.csv", "model_2.csv", "labels.csv", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let meta = json(&path(dir.path(), "synth.json"));
    assert!(meta["prng"].as_str().unwrap().starts_with("chacha20"));
    assert_eq!(meta["config"]["seed"], 3);

    let out = fuzzfuse(&["fuse", "--manifest", &path(dir.path(), "manifest.json"), "--out", &path(dir.path(), "p.csv")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert!(text.starts_with("sample_id,predicted,fused_p_0"));
    assert_eq!(text.lines().count(), 51);
}

#[test]
fn compare_and_sweep_row_counts() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "200");
    let scores: Vec<String> = (0..3).map(|k| path(dir.path(), &format!("model_{k}.csv"))).collect();
    let labels = path(dir.path(), "labels.csv");

    let mut args = vec!["compare", "--scores"];
    args.extend(scores.iter().map(String::as_str));
    let cmp = path(dir.path(), "compare.json");
    args.extend(["--labels", &labels, "--out", &cmp]);
    let out = fuzzfuse(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&cmp)["rows"].as_array().unwrap().len(), 7);

    let mut args = vec!["sweep", "--scores"];
    args.extend(scores.iter().map(String::as_str));
    let sw = path(dir.path(), "sweep.json");
    args.extend(["--labels", &labels, "--out", &sw]);
    let out = fuzzfuse(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = json(&sw)["rows"].as_array().unwrap().clone();
    assert_eq!(rows.len(), 27);
    assert_eq!(rows.iter().filter(|r| r["best"] == true).count(), 1);
    assert_eq!(rows[0]["best"], true);
}

#[test]
fn sweep_cap_is_enforced() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "20");
    let scores: Vec<String> = (0..3).map(|k| path(dir.path(), &format!("model_{k}.csv"))).collect();
    let mut args = vec!["sweep", "--scores"];
    args.extend(scores.iter().map(String::as_str));
    args.extend(["--max-combinations", "8"]);
    let out = fuzzfuse(&args);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("SweepTooLarge"));
}

#[test]
fn mcnemar_all_and_diverge() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "300");
    let scores: Vec<String> = (0..3).map(|k| path(dir.path(), &format!("model_{k}.csv"))).collect();
    let labels = path(dir.path(), "labels.csv");
    let preds = path(dir.path(), "fused.csv");
    let mut args = vec!["fuse", "--scores"];
    args.extend(scores.iter().map(String::as_str));
    args.extend(["--labels", &labels, "--integral", "choquet", "--out", &preds]);
    assert!(fuzzfuse(&args).status.success());

    let report = path(dir.path(), "mcnemar.json");
    let mut args = vec!["mcnemar", "--preds-a", &preds, "--labels", &labels, "--all", "--scores"];
    args.extend(scores.iter().map(String::as_str));
    args.extend(["--out", &report]);
    let out = fuzzfuse(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().count(), 4);
    let rows = json(&report);
    for r in rows.as_array().unwrap() {
        let p = r["p_value"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }

    let table = path(dir.path(), "div.json");
    let mut args = vec!["diverge", "--scores"];
    args.extend(scores.iter().map(String::as_str));
    args.extend(["--out", &table]);
    let out = fuzzfuse(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = json(&table);
    assert_eq!(t["kld"].as_array().unwrap().len(), 6);
    assert_eq!(t["jsd"].as_array().unwrap().len(), 3);
}

#[test]
fn eval_reports_both_conventions() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "100");
    let labels = path(dir.path(), "labels.csv");
    let model = path(dir.path(), "model_1.csv");
    for conv in ["as-printed", "standard"] {
        let out_path = path(dir.path(), &format!("{conv}.json"));
        let out = fuzzfuse(&["eval", "--preds", &model, "--labels", &labels, "--metric-convention", conv, "--out", &out_path]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let r = json(&out_path);
        assert_eq!(r["samples"], 100);
        let acc = r["aggregate"]["accuracy"].as_f64().unwrap();
        assert!(acc > 0.0 && acc <= 100.0 + 1e-9 || acc <= 1.0);
    }
}
