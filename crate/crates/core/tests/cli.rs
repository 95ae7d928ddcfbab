//! End-to-end tests of the command-line interface: exit codes, output files,
//! and the synth → evaluate/baseline/sweep happy paths.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_factuality")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn synth_fixture(dir: &Path) -> std::path::PathBuf {
    let data = dir.join("data");
    run_ok(&[
        "synth",
        "--out",
        data.to_str().unwrap(),
        "--seed",
        "5",
        "--accounts-per-class",
        "6",
        "--tweets-per-account",
        "60",
    ]);
    let cfg = data.join("exp.toml");
    // small model keeps the neural commands quick
    let mut text = std::fs::read_to_string(&cfg).unwrap();
    text.push_str("\n[model]\nhidden = 8\nepochs = 3\n");
    std::fs::write(&cfg, text).unwrap();
    cfg
}

#[test]
fn unknown_flag_exits_one_with_usage() {
    let out = run(&["evaluate", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--bogus"), "{stderr}");
    assert!(stderr.to_lowercase().contains("usage"), "{stderr}");
}

#[test]
fn missing_required_flag_exits_one_naming_it() {
    let out = run(&["ablate"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--config"), "{stderr}");
}

#[test]
fn unknown_command_exits_one() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("evaluate"));
}

#[test]
fn missing_input_file_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth_fixture(dir.path());
    // point the config at a corpus that does not exist
    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("corpus.jsonl", "no-such-corpus.jsonl");
    std::fs::write(&cfg, text).unwrap();
    let out = run(&[
        "evaluate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no-such-corpus"));
}

#[test]
fn malformed_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, "this is not toml [").unwrap();
    let out = run(&[
        "evaluate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_writes_corpus_lexicons_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth_fixture(dir.path());
    let data = cfg.parent().unwrap();
    for name in [
        "corpus.jsonl",
        "emotion.tsv",
        "sentiment0.tsv",
        "sentiment1.tsv",
        "sentiment2.tsv",
        "sentiment3.tsv",
        "morality.tsv",
        "embeddings.txt",
        "exp.toml",
        "manifest.json",
        "spec.json",
    ] {
        assert!(data.join(name).exists(), "missing {name}");
    }
    let corpus = std::fs::read_to_string(data.join("corpus.jsonl")).unwrap();
    assert_eq!(corpus.lines().count(), 24 * 60);
}

#[test]
fn evaluate_writes_report_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth_fixture(dir.path());
    let out_dir = dir.path().join("out");
    run_ok(&[
        "evaluate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["folds"].as_array().unwrap().len(), 5);
    assert!(report["mean_macro_f1"].is_number());
    let tsv = std::fs::read_to_string(out_dir.join("report.tsv")).unwrap();
    assert!(tsv.starts_with("fold\taccuracy\tmacro_f1"));
    assert!(tsv.contains("pooled"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "evaluate");
    assert_eq!(manifest["seed"], 5);
    assert!(manifest["config_hash"].as_str().unwrap().len() == 64);
    // no leftover temp files from atomic writes
    assert!(!out_dir.join("report.tmp").exists());
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth_fixture(dir.path());
    let out_dir = dir.path().join("out");
    run_ok(&[
        "baseline",
        "--kind",
        "majority",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--seed",
        "99",
    ]);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seed"], 99);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("baseline.json")).unwrap())
            .unwrap();
    assert_eq!(report["metadata"]["seed"], 99);
    let notes = report["metadata"]["notes"].as_array().unwrap();
    assert!(notes.iter().any(|n| n.as_str().unwrap().contains("majority")));
}

#[test]
fn baseline_rejects_unknown_kind() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth_fixture(dir.path());
    let out = run(&[
        "baseline",
        "--kind",
        "nonsense",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonsense"));
}

#[test]
fn sweep_chunks_emits_tsv_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth_fixture(dir.path());
    let mut text = std::fs::read_to_string(&cfg).unwrap();
    text.push_str("\n[sweep]\nchunk_sizes = [10, 20]\n");
    std::fs::write(&cfg, text).unwrap();
    let out_dir = dir.path().join("out");
    run_ok(&[
        "sweep-chunks",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let tsv = std::fs::read_to_string(out_dir.join("sweep_chunks.tsv")).unwrap();
    let lines: Vec<&str> = tsv.lines().collect();
    assert_eq!(lines.len(), 3); // header + 2 sizes
    assert!(lines[0].starts_with("chunk_size\t"));
    assert!(lines[1].starts_with("10\t"));
    assert!(lines[2].starts_with("20\t"));
}

#[test]
fn sweep_topk_emits_full_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth_fixture(dir.path());
    let mut text = std::fs::read_to_string(&cfg).unwrap();
    text.push_str("\n[sweep]\ntopk_metrics = [\"replies\", \"likes\"]\ntopk_ks = [10, 30]\n");
    std::fs::write(&cfg, text).unwrap();
    let out_dir = dir.path().join("out");
    run_ok(&[
        "sweep-topk",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let tsv = std::fs::read_to_string(out_dir.join("sweep_topk.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 5); // header + 2x2 grid
    assert!(tsv.contains("replies\t10\t"));
    assert!(tsv.contains("likes\t30\t"));
}

#[test]
fn train_writes_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth_fixture(dir.path());
    let out_dir = dir.path().join("out");
    run_ok(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let ckpt: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("checkpoint.json")).unwrap())
            .unwrap();
    assert_eq!(ckpt["version"], 1);
    assert_eq!(
        ckpt["labels"].as_array().unwrap().len(),
        4,
    );
    let history = std::fs::read_to_string(out_dir.join("history.tsv")).unwrap();
    assert!(history.starts_with("epoch\t"));
    assert!(history.lines().count() >= 2);
}

#[test]
fn ingest_cleans_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("raw.jsonl");
    let lines = [
        r#"{"id":"a1","account":"alice","label":"real","text":"solid reporting here","created_at":"2020-01-01T00:00:00Z","replies":1,"likes":2,"retweets":3}"#,
        r#"{"id":"a2","account":"alice","label":"real","text":"solid reporting here","created_at":"2020-01-02T00:00:00Z","replies":0,"likes":0,"retweets":0}"#,
        r#"{"id":"a3","account":"alice","label":"real","text":"http://only.a.link","created_at":"2020-01-03T00:00:00Z","replies":0,"likes":0,"retweets":0}"#,
        r#"{"id":"b1","account":"bob","label":"hoax","text":"https://spam.example","created_at":"2020-01-01T00:00:00Z","replies":0,"likes":0,"retweets":0}"#,
    ];
    std::fs::write(&input, lines.join("\n") + "\n").unwrap();
    let out_dir = dir.path().join("out");
    run_ok(&[
        "ingest",
        "--input",
        input.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["accounts_in"], 2);
    assert_eq!(summary["accounts_out"], 1);
    assert_eq!(summary["tweets_before"], 4);
    assert_eq!(summary["tweets_after"], 1);
    assert_eq!(summary["removed_accounts"][0], "bob");
    let cleaned = std::fs::read_to_string(out_dir.join("cleaned.jsonl")).unwrap();
    assert_eq!(cleaned.lines().count(), 1);
    assert!(cleaned.contains("\"a1\""));
}

#[test]
fn ablate_emits_six_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth_fixture(dir.path());
    let out_dir = dir.path().join("out");
    run_ok(&[
        "ablate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let tsv = std::fs::read_to_string(out_dir.join("ablation.tsv")).unwrap();
    let lines: Vec<&str> = tsv.lines().collect();
    assert_eq!(lines.len(), 7); // header + 6 rows
    assert!(lines[1].starts_with("none\t"));
    assert!(lines[2].starts_with("emotion\t"));
    assert!(lines[6].starts_with("embeddings\t"));
}
