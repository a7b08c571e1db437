use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use narrclause::corpus::write_corpus;
use narrclause::synthetic::{separable_corpus, SyntheticConfig};
use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_narrclause"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn clause(text: &str, labels: [&str; 3]) -> Value {
    let annotations: Vec<Value> =
        labels.iter().enumerate().map(|(i, l)| json!({"annotator": format!("w{i}"), "label": l})).collect();
    json!({"text": text, "tokens": null, "pos": null, "annotations": annotations})
}

fn write_lines(path: &Path, lines: &[Value]) {
    let text: String = lines.iter().map(|v| v.to_string() + "\n").collect();
    fs::write(path, text).unwrap();
}

/// Two pairs of stories share their action clauses word for word; every
/// other clause uses words of its own.
fn planted_corpus(dir: &Path) -> (PathBuf, PathBuf) {
    let mut stories = Vec::new();
    let mut vocab = Vec::new();
    let mut unique = 0;
    let mut fresh = |vocab: &mut Vec<String>| {
        unique += 1;
        let w = format!("u{unique}");
        vocab.push(w.clone());
        w
    };
    let shared = ["ran home", "grabbed keys"];
    for id in ["p0a", "p0b", "p1a", "p1b", "x0", "x1"] {
        let action = match id {
            "p0a" | "p0b" => shared[0].to_string(),
            "p1a" | "p1b" => shared[1].to_string(),
            _ => format!("{} {}", fresh(&mut vocab), fresh(&mut vocab)),
        };
        let clauses = vec![
            clause(&action, ["action"; 3]),
            clause(&format!("{} {}", fresh(&mut vocab), fresh(&mut vocab)), ["evaluation"; 3]),
            clause(&fresh(&mut vocab), ["orientation"; 3]),
        ];
        stories.push(json!({"story_id": id, "speaker_gender": null, "clauses": clauses}));
    }
    vocab.extend(["ran", "home", "grabbed", "keys"].map(String::from));
    let corpus = dir.join("planted.jsonl");
    write_lines(&corpus, &stories);
    let dim = vocab.len();
    let vectors: String = vocab
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let row: Vec<String> = (0..dim).map(|j| if i == j { "1" } else { "0" }.to_string()).collect();
            format!("{w} {}\n", row.join(" "))
        })
        .collect();
    let emb = dir.join("onehot.txt");
    fs::write(&emb, vectors).unwrap();
    (corpus, emb)
}

#[test]
fn split_writes_clauses_and_reports_bad_lines() {
    let dir = tempfile::tempdir().unwrap();
    let trees = dir.path().join("trees.txt");
    fs::write(&trees, "(ROOT (S (S (NP (PRP I)) (VP (VBD ran))) (CC and) (S (NP (PRP she)) (VP (VBD left))) (. .)))\n").unwrap();
    let out = dir.path().join("clauses.jsonl");
    let o = run(&["split", "--trees", p(&trees), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let story: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(story["clauses"].as_array().unwrap().len(), 2);
    assert!(dir.path().join("clauses.jsonl.run.json").exists());

    fs::write(&trees, "(ROOT (S (NP (PRP I)) (VP (VBD ran))))\n(ROOT (S (NP (PRP I)) (VP (VBD ran)))\n").unwrap();
    let o = run(&["split", "--trees", p(&trees), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn aggregate_is_reproducible_and_summarizes_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.jsonl");
    write_lines(
        &corpus,
        &[json!({"story_id": "s", "speaker_gender": null, "clauses": [
            clause("I ran", ["action"; 3]),
            clause("it was great", ["evaluation"; 3]),
        ]})],
    );
    let out1 = dir.path().join("a1.jsonl");
    let out2 = dir.path().join("a2.jsonl");
    let o = run(&["aggregate", "--corpus", p(&corpus), "--out", p(&out1), "--seed", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("mean agreement 3.00"), "{}", stdout(&o));
    run(&["aggregate", "--corpus", p(&corpus), "--out", p(&out2), "--seed", "4"]);
    assert_eq!(fs::read(&out1).unwrap(), fs::read(&out2).unwrap());
}

#[test]
fn usage_and_data_errors_have_distinct_codes() {
    assert_eq!(run(&["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["evaluate", "--corpus", "x.jsonl"]).status.code(), Some(1));
    assert_eq!(run(&["stats", "--corpus", "/nonexistent/corpus.jsonl"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{\"story_id\": 3}\n").unwrap();
    let o = run(&["stats", "--corpus", p(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 1"));
}

#[test]
fn train_evaluate_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus_path = dir.path().join("syn.jsonl");
    let corpus = separable_corpus(&SyntheticConfig { n_clauses: 240, seed: 2, ..SyntheticConfig::default() }).unwrap();
    write_corpus(&corpus_path, &corpus).unwrap();
    let config = dir.path().join("config.json");
    fs::write(
        &config,
        json!({"model": {"filters_per_width": 6, "hidden_dim": 8}, "training": {"max_epochs": 4, "learning_rate": 0.001}, "split": {"fractions": [0.7, 0.15, 0.15]}})
            .to_string(),
    )
    .unwrap();
    let ck1 = dir.path().join("ck1");
    let ck2 = dir.path().join("ck2");
    for ck in [&ck1, &ck2] {
        let o = run(&["train", "--corpus", p(&corpus_path), "--out", p(ck), "--config", p(&config), "--seed", "9", "--quiet"]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("best epoch"));
    }
    for name in ["manifest.json", "fc1.weight.f32", "split.json", "train_log.json"] {
        assert_eq!(fs::read(ck1.join(name)).unwrap(), fs::read(ck2.join(name)).unwrap(), "{name}");
    }
    let run_config: Value = serde_json::from_str(&fs::read_to_string(ck1.join("run_config.json")).unwrap()).unwrap();
    assert_eq!(run_config["seed"], 9);
    assert_eq!(run_config["training"]["max_epochs"], 4);

    let report = dir.path().join("eval.json");
    let o = run(&[
        "evaluate", "--corpus", p(&corpus_path), "--checkpoint", p(&ck1), "--agreement", "3", "--out", p(&report),
        "--seed", "9",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("micro-F1"));
    let r: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!(r["micro_f1"].as_f64().unwrap() >= 0.0);

    let o = run(&["evaluate", "--corpus", p(&corpus_path), "--baseline", "rf", "--seed", "9", "--config", p(&config)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("rf-100"));

    let preds = dir.path().join("pred.jsonl");
    let o = run(&["predict", "--corpus", p(&corpus_path), "--checkpoint", p(&ck1), "--out", p(&preds)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(&preds).unwrap().lines().count(), 240);
}

#[test]
fn majority_baseline_scores_prevalence() {
    let dir = tempfile::tempdir().unwrap();
    let corpus_path = dir.path().join("syn.jsonl");
    let corpus = separable_corpus(&SyntheticConfig { n_clauses: 300, seed: 5, ..SyntheticConfig::default() }).unwrap();
    write_corpus(&corpus_path, &corpus).unwrap();
    let out = dir.path().join("eval.json");
    let o = run(&[
        "evaluate", "--corpus", p(&corpus_path), "--baseline", "majority", "--partition", "all", "--out", p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let confusion = r["confusion"].as_array().unwrap();
    let n = r["n_examples"].as_f64().unwrap();
    let predicted_col = (0..3).find(|&j| confusion.iter().any(|row| row[j] != 0)).unwrap();
    assert!((0..3).filter(|&j| j != predicted_col).all(|j| confusion.iter().all(|row| row[j] == 0)));
    let prevalence = confusion[predicted_col][predicted_col].as_f64().unwrap() / n;
    assert_eq!(r["micro_f1"].as_f64().unwrap(), prevalence);
}

#[test]
fn match_story_with_itself_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, emb) = planted_corpus(dir.path());
    let dim = fs::read_to_string(&emb).unwrap().lines().count().to_string();
    let o = run(&["match", "--corpus", p(&corpus), "--a", "p0a", "--b", "p0a", "--embeddings", p(&emb), "--dim", &dim]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).trim_end().ends_with("1.000000"), "{}", stdout(&o));
    let o = run(&["match", "--corpus", p(&corpus), "--a", "p0a", "--b", "nope", "--embeddings", p(&emb), "--dim", &dim]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["match", "--corpus", p(&corpus), "--a", "p0a", "--b", "p0b"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn select_pairs_recovers_planted_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, emb) = planted_corpus(dir.path());
    let dim = fs::read_to_string(&emb).unwrap().lines().count().to_string();
    let out = dir.path().join("pairs.jsonl");
    let o = run(&[
        "select-pairs", "--corpus", p(&corpus), "--aspect", "action", "--threshold", "0.5", "--embeddings", p(&emb),
        "--dim", &dim, "--out", p(&out), "--distractors", "--jobs", "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let pairs: Vec<(String, String)> = fs::read_to_string(&out)
        .unwrap()
        .lines()
        .map(|l| {
            let v: Value = serde_json::from_str(l).unwrap();
            (v["story_a"].as_str().unwrap().to_string(), v["story_b"].as_str().unwrap().to_string())
        })
        .collect();
    assert_eq!(pairs, vec![("p0a".into(), "p0b".into()), ("p1a".into(), "p1b".into())]);
    let run_config: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("pairs.jsonl.run.json")).unwrap()).unwrap();
    assert_eq!(run_config["matcher"]["encoder"], "word-vectors");
}

#[test]
fn report_prints_table_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("records.jsonl");
    let rec = |main: &str, aspect: &str, detected: bool| {
        json!({"main": main, "matched": "m", "random": "r", "aspect": aspect, "order": "AB",
               "chosen": if detected { "m" } else { "r" }, "reason": null, "mapped_aspects": [aspect]})
    };
    write_lines(&records, &[rec("a", "action", true), rec("b", "action", false), rec("c", "evaluation", true)]);
    let out = dir.path().join("reports");
    let o = run(&["report", "--records", p(&records), "--out-dir", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("50.0%"));
    let csv = fs::read_to_string(out.join("detection.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some("action,1,2,50.0"));
    let o = run(&["report", "--records", p(&records), "--kind", "mentions", "--out-dir", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("mentions.csv").exists() && out.join("run_config.json").exists());
}
