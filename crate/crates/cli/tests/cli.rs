use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use persona_core::eval::read_report_csv;
use persona_core::preprocess::clean_tweet;

fn persona(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_persona")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = persona(args);
    assert!(
        out.status.success(),
        "persona {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, seed: &str) {
    ok(&[
        "synth", "--users", "40", "--tweets", "30", "--test-users", "8", "--seed", seed, "--out", p(dir),
    ]);
}

#[test]
fn golden_cleaning_cases() {
    let text = include_str!("data/golden_tweets.jsonl");
    let mut n = 0;
    for line in text.lines() {
        let case: serde_json::Value = serde_json::from_str(line).unwrap();
        let input = case["input"].as_str().unwrap();
        let expected = case["expected"].as_str().unwrap();
        let got = clean_tweet(input);
        assert_eq!(got, expected, "input {input:?}");
        assert_eq!(clean_tweet(&got), got, "not idempotent on {input:?}");
        n += 1;
    }
    assert!(n >= 30);
}

#[test]
fn clean_reads_stdin_lines() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_persona"))
        .args(["clean", "--hashtags", "strip"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all("Loving #RustLang! https://x.co\n@Ann 42 times\n".as_bytes())
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "loving rustlang\nann times\n");
}

#[test]
fn train_then_predict() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "5");
    let emb = d.join("embeddings.txt");
    ok(&[
        "train", "--corpus", p(&d.join("corpus.jsonl")), "--embeddings", p(&emb), "--features", "embedding", "--model",
        "ridge", "--out", p(&d.join("m")),
    ]);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("m/train_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["method"], "embedding+ridge");
    assert_eq!(summary["hyperparameters"].as_object().unwrap().len(), 5);

    ok(&[
        "predict", "--bundle", p(&d.join("m/bundle.json")), "--corpus", p(&d.join("test.jsonl")), "--embeddings",
        p(&emb), "--out", p(&d.join("p")),
    ]);
    let preds = fs::read_to_string(d.join("p/predictions.csv")).unwrap();
    let lines: Vec<&str> = preds.lines().collect();
    assert_eq!(lines[0], "user_id,o,c,e,a,n");
    assert_eq!(lines.len(), 9);
    for l in &lines[1..] {
        let cols: Vec<&str> = l.split(',').collect();
        assert_eq!(cols.len(), 6);
        assert!(cols[1..].iter().all(|v| v.parse::<f64>().unwrap().is_finite()));
    }
    assert_eq!(fs::read_to_string(d.join("p/errors.csv")).unwrap(), "user_id,error\n");
    assert!(!d.join("p/predictions.csv.tmp").exists());
}

#[test]
fn predict_rejects_a_different_table() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(&d.join("a"), "1");
    synth(&d.join("b"), "2");
    ok(&[
        "train", "--corpus", p(&d.join("a/corpus.jsonl")), "--embeddings", p(&d.join("a/embeddings.txt")), "--model",
        "ridge", "--out", p(&d.join("m")),
    ]);
    let out = persona(&[
        "predict", "--bundle", p(&d.join("m/bundle.json")), "--corpus", p(&d.join("a/test.jsonl")), "--embeddings",
        p(&d.join("b/embeddings.txt")), "--out", p(&d.join("p")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("digest"));
    assert!(!d.join("p/predictions.csv").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "9");
    let corpus = d.join("corpus.jsonl");

    let out = persona(&["train", "--corpus", p(&corpus), "--embeddings", p(&d.join("missing.txt")), "--out", p(d)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--embeddings"));

    let out = persona(&["train", "--corpus", p(&corpus), "--out", p(d)]);
    assert_eq!(out.status.code(), Some(1));

    assert_eq!(persona(&["eval", "--setting", "nonsense"]).status.code(), Some(1));
    assert_eq!(persona(&["--help"]).status.code(), Some(0));

    let bad = d.join("bad.jsonl");
    fs::write(&bad, "{\"user_id\": \"u1\", \"traits\": \n").unwrap();
    let out = persona(&["coverage", "--corpus", p(&bad), "--out", p(d)]);
    assert_eq!(out.status.code(), Some(2));

    let cfg = d.join("run.conf");
    fs::write(&cfg, "folds = many\n").unwrap();
    let out = persona(&["eval", "--setting", "full", "--config", p(&cfg), "--corpus", p(&corpus), "--out", p(d)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_file_supplies_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "4");
    let cfg = d.join("run.conf");
    fs::write(
        &cfg,
        format!(
            "corpus = {}\nlexicon = {}\nmethods = lexicon+ridge\nfolds = 4\nout = {}\n",
            p(&d.join("corpus.jsonl")),
            p(&d.join("lexicon.tsv")),
            p(&d.join("r"))
        ),
    )
    .unwrap();
    ok(&["eval", "--setting", "full", "--config", p(&cfg)]);
    let rows = read_report_csv(fs::File::open(d.join("r/report.csv")).unwrap()).unwrap();
    assert!(rows.iter().all(|r| r.setting == "full"));
    assert!(rows.iter().any(|r| r.method == "ridge" && r.feature == "lexicon" && r.metric == "pearson_r"));
}

#[test]
fn eval_reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "6");
    let corpus = d.join("corpus.jsonl");
    let test = d.join("test.jsonl");
    let lex = d.join("lexicon.tsv");
    for run in ["x", "y"] {
        ok(&[
            "eval", "--setting", "sampling", "--corpus", p(&corpus), "--lexicon", p(&lex), "--methods",
            "lexicon+ridge,ngram+ridge", "--folds", "4", "--tweet-counts", "5,30", "--subsets", "2", "--out",
            p(&d.join(run).join("s")),
        ]);
        ok(&[
            "eval", "--setting", "reallife", "--corpus", p(&corpus), "--test-corpus", p(&test), "--lexicon", p(&lex),
            "--methods", "lexicon+ridge,ngram+ridge", "--out", p(&d.join(run).join("r")),
        ]);
    }
    for f in ["s/report.csv", "s/sampling.svg", "r/report.csv"] {
        let a = fs::read(d.join("x").join(f)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, fs::read(d.join("y").join(f)).unwrap(), "{f} differs between runs");
    }
    let rows = read_report_csv(fs::File::open(d.join("x/r/report.csv")).unwrap()).unwrap();
    let df = rows.iter().find(|r| r.metric == "anova_df_within").unwrap();
    assert_eq!(df.value, (2 * 8 - 2) as f64);
}
