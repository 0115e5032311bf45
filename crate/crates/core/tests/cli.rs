//! End-to-end exercises of the `glaudit` binary: the command pipeline on a
//! small synthetic corpus, exit codes, and the single-line error contract.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_glaudit")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).to_string()
}

fn write_spec(dir: &Path) -> PathBuf {
    let vocab: Vec<String> = [
        "student",
        "excellent",
        "clinical",
        "work",
        "team",
        "skills",
        "program",
        "year",
        "strong",
        "care",
        "dedication",
        "residency",
        "rotation",
        "exam",
        "committee",
        "training",
        "knowledge",
        "practice",
        "time",
        "week",
        "effort",
        "service",
        "project",
        "study",
        "course",
        "record",
        "talent",
        "detail",
        "review",
        "period",
        "progress",
        "result",
        "quality",
        "group",
        "class",
        "goal",
        "task",
        "role",
        "value",
        "plan",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let spec = serde_json::json!({
        "explicit_terms": [["he", 1], ["she", 0]],
        "implicit_cues": [
            {"token": "leadership", "gender": 1, "p": 0.85},
            {"token": "leadership", "gender": 0, "p": 0.15}
        ],
        "base_vocab": vocab,
        "letters_per_class": [120, 180],
        "seed": 5,
        "length_range": [40, 90]
    });
    let path = dir.join("spec.json");
    std::fs::write(&path, spec.to_string()).unwrap();
    path
}

#[test]
fn full_command_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let p = |name: &str| d.join(name).to_string_lossy().to_string();
    let spec = write_spec(d);

    let stdout = ok(&[
        "synth",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        &p("raw.jsonl"),
    ]);
    assert!(stdout.contains("generated 300 letters"));

    let stdout = ok(&[
        "degender",
        "--in",
        &p("raw.jsonl"),
        "--out",
        &p("edg.jsonl"),
        "--trace",
        &p("trace.jsonl"),
    ]);
    assert!(stdout.contains("degendered 300 letters"));
    let trace = std::fs::read_to_string(p("trace.jsonl")).unwrap();
    let first_line = trace
        .lines()
        .next()
        .expect("male cues guarantee replacements");
    let row: serde_json::Value = serde_json::from_str(first_line).unwrap();
    for key in ["id", "start", "end", "original", "replacement"] {
        assert!(row.get(key).is_some(), "trace row missing {key}");
    }

    ok(&[
        "split",
        "--in",
        &p("edg.jsonl"),
        "--out",
        &p("edg_split.jsonl"),
        "--seed",
        "3",
    ]);
    ok(&[
        "train",
        "--in",
        &p("edg_split.jsonl"),
        "--model-out",
        &p("model_edg.json"),
        "--kind",
        "logistic",
        "--seed",
        "3",
    ]);
    let stdout = ok(&[
        "eval",
        "--model",
        &p("model_edg.json"),
        "--in",
        &p("edg_split.jsonl"),
        "--report-out",
        &p("eval_edg.json"),
    ]);
    assert!(stdout.contains("Accuracy"));

    let stdout = ok(&[
        "tfidf",
        "--in",
        &p("edg_split.jsonl"),
        "--report-out",
        &p("tfidf.json"),
        "--min-count",
        "5",
    ]);
    assert!(stdout.contains("Male") || stdout.contains("Female"));

    ok(&[
        "shap",
        "--model",
        &p("model_edg.json"),
        "--in",
        &p("edg_split.jsonl"),
        "--report-out",
        &p("shap.json"),
        "--sample-letters",
        "40",
        "--min-support",
        "10",
        "--seed",
        "3",
    ]);

    std::fs::write(p("tokens.txt"), "leadership\n").unwrap();
    ok(&[
        "mask",
        "--in",
        &p("edg_split.jsonl"),
        "--out",
        &p("masked.jsonl"),
        "--tokens-from",
        &p("tokens.txt"),
    ]);
    let masked = std::fs::read_to_string(p("masked.jsonl")).unwrap();
    assert!(masked.contains("[MASK]"));
    assert!(!masked.contains("leadership"));

    ok(&[
        "train",
        "--in",
        &p("masked.jsonl"),
        "--model-out",
        &p("model_masked.json"),
        "--seed",
        "4",
    ]);
    let stdout = ok(&[
        "flips",
        "--edg-corpus",
        &p("edg_split.jsonl"),
        "--edg-model",
        &p("model_edg.json"),
        "--masked-corpus",
        &p("masked.jsonl"),
        "--masked-model",
        &p("model_masked.json"),
        "--tokens-from",
        &p("tokens.txt"),
        "--report-out",
        &p("flips.json"),
        "--runs",
        "5",
        "--seed",
        "3",
    ]);
    assert!(stdout.contains("F -> M"));
}

#[test]
fn audit_writes_a_complete_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let spec = write_spec(d);
    let corpus = d.join("raw.jsonl");
    ok(&[
        "synth",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        corpus.to_str().unwrap(),
    ]);

    let out_dir = d.join("audit");
    let config = d.join("audit.conf");
    std::fs::write(
        &config,
        "epochs = 20\nshap_sample_letters = 30\nshap_min_support = 10\nflip_runs = 5\ntfidf_min_count = 5\n",
    )
    .unwrap();
    let stdout = ok(&[
        "audit",
        "--in",
        corpus.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--seed",
        "9",
        "--config",
        config.to_str().unwrap(),
    ]);
    assert!(stdout.contains("audit complete"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["status"], "complete");
    for name in [
        "audit.json",
        "audit.md",
        "corpus_edg.jsonl",
        "eval_baseline.json",
        "shap_rankings.txt",
        "tfidf_report.txt",
        "flips_shap.json",
        "tokens_tfidf.txt",
    ] {
        assert!(out_dir.join(name).exists(), "missing artifact {name}");
    }
}

#[test]
fn usage_errors_exit_one_with_single_line_stderr() {
    let out = run(&[
        "split",
        "--in",
        "nowhere.jsonl",
        "--out",
        "x.jsonl",
        "--ratios",
        "bad",
    ]);
    assert_eq!(
        out.status.code(),
        Some(1),
        "unparseable ratios are a usage error"
    );

    let out = run(&["--definitely-not-a-flag"]);
    assert_eq!(out.status.code(), Some(1));

    let out = run(&["eval", "--model"]);
    assert_eq!(out.status.code(), Some(1), "missing flag value");
}

#[test]
fn data_errors_exit_two_with_single_line_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(
        &bad,
        "{\"id\":\"a\",\"text\":\"x\",\"gender\":1}\nnot json\n",
    )
    .unwrap();
    let out = run(&[
        "split",
        "--in",
        bad.to_str().unwrap(),
        "--out",
        dir.path().join("out.jsonl").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let lines: Vec<&str> = stderr.trim_end().lines().collect();
    assert_eq!(
        lines.len(),
        1,
        "error output must be a single line: {stderr:?}"
    );
    assert!(lines[0].starts_with("error: "));
    assert!(lines[0].contains("line 2"));

    let out = run(&[
        "split",
        "--in",
        dir.path().join("missing.jsonl").to_str().unwrap(),
        "--out",
        dir.path().join("out.jsonl").to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "missing input file is a data error"
    );
}

#[test]
fn version_and_help_exit_zero() {
    let out = run(&["--version"]);
    assert_eq!(out.status.code(), Some(0));
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let out = run(&["audit", "--help"]);
    assert_eq!(out.status.code(), Some(0));
}
