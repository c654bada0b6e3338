use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use epex::commands::PredictLine;
use epex::io::load_corpus;
use epex_core::corpus::{example_sentence, AnnotatedSentence};
use epex_core::eval::EvalReport;

fn epex(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epex"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth(dir: &Path, sentences: usize) -> PathBuf {
    let path = dir.join("synthetic.jsonl");
    let o = epex(dir, &["synth", "--sentences", &sentences.to_string()]);
    assert!(o.status.success(), "{}", stderr(&o));
    path
}

/// Two quick epochs at desk size with a small sentence length.
fn quick_train(dir: &Path, corpus: &Path, extra: &[&str]) -> Output {
    let corpus = corpus.to_str().unwrap();
    let mut args = vec!["train", "--preset", "desk", "--corpus", corpus, "--epochs", "2", "--max-len", "16", "--quiet"];
    args.extend_from_slice(extra);
    epex(dir, &args)
}

#[test]
fn missing_corpus_fails_without_writing_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let o = quick_train(dir.path(), &dir.path().join("absent.jsonl"), &[]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("absent.jsonl"), "{}", stderr(&o));
    assert!(!dir.path().join("checkpoint.bin").exists());
    assert!(!dir.path().join("train_log.jsonl").exists());
}

#[test]
fn invalid_config_fails_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), 4);
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"preset":"desk","model":{"heads":5}}"#).unwrap();
    let o = epex(dir.path(), &["--config", cfg.to_str().unwrap(), "train", "--corpus", corpus.to_str().unwrap(), "--quiet"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("heads"), "{}", stderr(&o));
    assert!(!dir.path().join("checkpoint.bin").exists());
}

#[test]
fn synth_is_deterministic_and_loads_cleanly() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (pa, pb) = (synth(a.path(), 20), synth(b.path(), 20));
    assert_eq!(fs::read(&pa).unwrap(), fs::read(&pb).unwrap());
    let loaded = load_corpus(&pa).unwrap();
    assert_eq!(loaded.sentences.len(), 20);
    assert!(loaded.warnings.is_empty());
}

#[test]
fn synth_to_unwritable_path_fails() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("corpus.jsonl");
    let o = epex(dir.path(), &["synth", "--output", out.to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn train_eval_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), 8);
    let o = quick_train(dir.path(), &corpus, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let log = fs::read_to_string(dir.path().join("train_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2);
    let ckpt = dir.path().join("checkpoint.bin");

    let o = epex(dir.path(), &["eval", "--checkpoint", ckpt.to_str().unwrap(), "--corpus", corpus.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: EvalReport = serde_json::from_str(&fs::read_to_string(dir.path().join("eval.json")).unwrap()).unwrap();
    for ((_, s), (_, r)) in report.strict.tasks().into_iter().zip(report.relaxed.tasks()) {
        assert!(s.f1 <= r.f1 + 1e-12);
    }
    assert!(String::from_utf8_lossy(&o.stdout).contains("relaxed"));

    let input = dir.path().join("in.jsonl");
    let ex = serde_json::to_string(&AnnotatedSentence {
        relations: vec![],
        ..example_sentence()
    })
    .unwrap();
    fs::write(&input, format!("{ex}\n{{\"tokens\": 3}}\n{{\"tokens\":[]}}\n")).unwrap();
    let o = epex(dir.path(), &["predict", "--checkpoint", ckpt.to_str().unwrap(), "--input", input.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lines: Vec<PredictLine> = fs::read_to_string(dir.path().join("predictions.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    assert!(matches!(&lines[0], PredictLine::Triples { tokens, .. } if tokens.len() == 7));
    assert!(matches!(&lines[1], PredictLine::Error { line: 2, .. }));
    assert!(matches!(&lines[2], PredictLine::Triples { tokens, triples } if tokens.is_empty() && triples.is_empty()));

    fs::write(&input, "").unwrap();
    let o = epex(dir.path(), &["predict", "--checkpoint", ckpt.to_str().unwrap(), "--input", input.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(dir.path().join("predictions.jsonl")).unwrap(), "");

    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let o = epex(dir.path(), &["eval", "--checkpoint", ckpt.to_str().unwrap(), "--corpus", empty.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("empty"), "{}", stderr(&o));

    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"preset":"desk","model":{"hidden_dim":64,"slots":2}}"#).unwrap();
    let o = epex(
        dir.path(),
        &["--config", cfg.to_str().unwrap(), "eval", "--checkpoint", ckpt.to_str().unwrap(), "--corpus", corpus.to_str().unwrap()],
    );
    assert!(!o.status.success());
    let msg = stderr(&o);
    assert!(msg.contains("hidden_dim") && msg.contains("slots") && !msg.contains("heads"), "{msg}");
}

#[test]
fn gradcheck_flags_a_corrupted_block() {
    let dir = tempfile::tempdir().unwrap();
    let o = epex(dir.path(), &["gradcheck", "--corrupt", "rc_head"]);
    assert!(!o.status.success());
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.lines().any(|l| l.starts_with("rc_head") && l.ends_with("FAIL")), "{out}");
    for block in epex_core::checks::BLOCKS {
        assert!(out.lines().any(|l| l.starts_with(block)), "{block} missing");
    }
}

#[test]
fn redundancy_reports_and_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), 10);
    let o = epex(dir.path(), &["redundancy", "--corpus", corpus.to_str().unwrap(), "--slots", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: epex::commands::RedundancyOutput =
        serde_json::from_str(&fs::read_to_string(dir.path().join("redundancy.json")).unwrap()).unwrap();
    assert_eq!(r.counts.slot_based, 10);
    assert!((r.histogram.fractions.values().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn kfold_reports_every_fold_and_rejects_too_many() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), 6);
    let c = corpus.to_str().unwrap();
    let o = epex(dir.path(), &["kfold", "--folds", "2", "--preset", "desk", "--corpus", c, "--epochs", "1", "--max-len", "16", "--quiet"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out: epex::commands::KfoldOutput =
        serde_json::from_str(&fs::read_to_string(dir.path().join("kfold.json")).unwrap()).unwrap();
    assert_eq!(out.folds.len(), 2);
    assert_eq!((out.folds[0].seed, out.folds[1].seed), (0, 1));
    let mut tested: Vec<usize> = out.folds.iter().flat_map(|f| f.test.clone()).collect();
    tested.sort();
    assert_eq!(tested, (0..6).collect::<Vec<_>>());
    assert!(dir.path().join("fold_1").join("train_log.jsonl").exists());

    let o = epex(dir.path(), &["kfold", "--folds", "7", "--preset", "desk", "--corpus", c, "--quiet"]);
    assert!(!o.status.success());
}

#[test]
fn sweep_writes_one_csv_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), 4);
    let c = corpus.to_str().unwrap();
    let o = epex(
        dir.path(),
        &["sweep", "--param", "slots", "--values", "1,2", "--preset", "desk", "--corpus", c, "--epochs", "1", "--max-len", "16"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("param,value,"));
    assert!(lines[1].starts_with("slots,1,train,"));
}
