//! Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use epex::commands::{cmd_eval, cmd_gradcheck, cmd_redundancy, cmd_synth, cmd_train, load_checkpoint, predict_lines, PredictLine};
use epex::config::{Preset, RunConfig};
use epex::io::save_jsonl;
use epex_core::checks::{tiny_config, SuiteOptions, BLOCKS, TOLERANCE};
use epex_core::corpus::{build_vocab, example_sentence, order_entity_pairs, AnnotatedSentence, Entity, SynthSpec};
use epex_core::eval::{redundancy_count, EvalReport, Method, Setting};
use epex_core::model::Ablation;
use epex_core::rng::{stream, Stream};
use rand::seq::SliceRandom;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: impl Into<String>) -> Outcome {
    if ok {
        Ok(detail.into())
    } else {
        Err(detail.into())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    format!("{e:#}")
}

fn synthetic_corpus(dir: &Path) -> Result<std::path::PathBuf, String> {
    let path = dir.join("synthetic.jsonl");
    cmd_synth(&SynthSpec::default(), &path).map_err(err)?;
    Ok(path)
}

fn gradient_suite() -> Outcome {
    let t = tiny_config();
    if t.max_len > 8 || t.embed_dim > 16 || t.hidden_dim > 16 || t.slots > 3 {
        return Err(format!("check shapes too large: {t:?}"));
    }
    let s = cmd_gradcheck(&SuiteOptions::default()).map_err(err)?;
    let names: BTreeSet<&str> = s.blocks.iter().map(|b| b.block.as_str()).collect();
    let missing: Vec<_> = BLOCKS.iter().filter(|b| !names.contains(**b)).collect();
    let worst = s.blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max);
    let failed: Vec<_> = s.blocks.iter().filter(|b| !b.passed || b.max_rel_error > 1e-4).map(|b| &b.block).collect();
    let secs = s.elapsed.as_secs_f64();
    check(
        missing.is_empty() && failed.is_empty() && TOLERANCE <= 1e-4 && s.elapsed < Duration::from_secs(60),
        format!(
            "{} blocks, max rel err {worst:.2e} (≤ 1e-4), {secs:.1}s (< 60s); missing {missing:?}, failed {failed:?}",
            s.blocks.len()
        ),
    )
}

fn overfit() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let corpus_path = synthetic_corpus(dir.path())?;
    let corpus = epex::io::load_corpus(&corpus_path).map_err(err)?.sentences;
    let vocab = build_vocab(&corpus, 1).len();
    let max_triples = corpus.iter().map(|s| s.relations.len()).max().unwrap_or(0);
    let mut cfg = RunConfig::preset(Preset::Desk);
    cfg.corpus = Some(corpus_path.clone());
    cfg.out_dir = dir.path().join("run");
    cfg.stop_when_perfect = true;
    let m = &cfg.model;
    if corpus.len() != 32 || vocab > 64 || max_triples > 3 || m.slots != 3 || m.max_len != 32 || m.embed_dim != 32 || m.hidden_dim != 32 || m.epochs != 300 {
        return Err(format!("setup off: {} sentences, vocab {vocab}, max triples {max_triples}, {m:?}", corpus.len()));
    }
    let s = cmd_train(&cfg, |_| {}).map_err(err)?;
    let secs = s.elapsed.as_secs_f64();
    let strict = s.train_report.strict;
    let perfect = [strict.ner.f1, strict.epe.f1, strict.rc.f1].iter().all(|&f| f == 1.0);

    let report = cmd_eval(&s.checkpoint, &corpus_path, None).map_err(err)?;
    let reloaded = report.strict.tasks().iter().all(|(_, t)| t.f1 == 1.0);

    let ckpt = load_checkpoint(&s.checkpoint, None).map_err(err)?;
    let ex = example_sentence();
    let unlabelled = AnnotatedSentence {
        relations: Vec::new(),
        entities: Vec::new(),
        ..ex.clone()
    };
    let line = serde_json::to_string(&unlabelled).map_err(err)?;
    let example_ok = match &predict_lines(&ckpt, &line)[..] {
        [PredictLine::Triples { triples, .. }] => {
            let mut got = triples.clone();
            let mut want = ex.gold().triples;
            got.sort();
            want.sort();
            got == want
        }
        _ => false,
    };
    check(
        perfect && reloaded && example_ok && s.records.len() <= 300 && s.elapsed < Duration::from_secs(300),
        format!(
            "strict F1 ner {} epe {} rc {} after {} epochs, {secs:.0}s (< 300s); checkpoint re-eval perfect: {reloaded}; example sentence triples: {example_ok}",
            strict.ner.f1,
            strict.epe.f1,
            strict.rc.f1,
            s.records.len()
        ),
    )
}

fn redundancy() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let sentence = AnnotatedSentence {
        tokens: (0..128).map(|i| format!("t{i}")).collect(),
        entities: [(0, "A"), (10, "B"), (20, "A")]
            .iter()
            .map(|&(start, kind)| Entity {
                start,
                end: start + 1,
                kind: kind.into(),
            })
            .collect(),
        relations: Vec::new(),
    };
    let path = dir.path().join("one.jsonl");
    save_jsonl(&path, &[sentence]).map_err(err)?;
    let r = cmd_redundancy(&path, 3).map_err(err)?;
    let got = (r.counts.table_filling, r.counts.pairwise, r.counts.slot_based);
    let direct = (
        redundancy_count(Method::TableFilling, 128, 3, 3).map_err(err)?,
        redundancy_count(Method::Pairwise, 128, 3, 3).map_err(err)?,
        redundancy_count(Method::SlotBased, 128, 3, 3).map_err(err)?,
    );
    check(
        got == (8128, 9, 3) && direct == got,
        format!("table filling {} / pairwise {} / slot based {} (want 8128 / 9 / 3)", got.0, got.1, got.2),
    )
}

fn degeneracy() -> Outcome {
    let worst = support::degeneracy_max_deviation(100);
    check(worst <= 1e-12, format!("100 draws, max |Δ| {worst:.2e} (≤ 1e-12)"))
}

fn metric_oracle() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for setting in Setting::ALL {
        let t = support::oracle_trials(2024, 100, setting);
        ok &= t.trials == 100 && t.mismatches == 0 && t.relaxed_below_strict == 0 && t.empty_predictions > 0 && t.duplicate_predictions > 0;
        parts.push(format!(
            "{setting:?}: {} trials, {} mismatches, {} relaxed<strict, {} empty / {} duplicate predictions",
            t.trials, t.mismatches, t.relaxed_below_strict, t.empty_predictions, t.duplicate_predictions
        ));
    }
    check(ok, parts.join("; "))
}

fn invariants() -> Outcome {
    let softmax = support::softmax_max_row_error(99, 500);
    let ln = support::layer_norm_max_mean(99, 500);
    let f1 = support::f1_grid_max_error(100);
    check(
        softmax <= 1e-9 && ln <= 1e-9 && f1 <= 1e-12,
        format!("softmax |Σ−1| {softmax:.1e}, layer norm |mean| {ln:.1e} (≤ 1e-9); F1 grid 101² incl. P+R=0, max err {f1:.1e}"),
    )
}

fn ordering() -> Outcome {
    let ex = example_sentence();
    let text = |i: usize| ex.tokens[ex.entities[i].start..ex.entities[i].end].join(" ");
    let seq: Vec<(String, String)> = order_entity_pairs(&ex).iter().map(|p| (text(p.subject), text(p.predicate))).collect();
    let fig_ok = seq == [("David".to_string(), "AP".to_string()), ("AP".to_string(), "Seattle".to_string())];
    let mut rng = stream(41, Stream::Synthetic);
    let mut unstable = 0;
    for _ in 0..100 {
        let s = support::random_sentence(&mut rng);
        let base = order_entity_pairs(&s);
        for _ in 0..5 {
            let mut p = s.clone();
            p.relations.shuffle(&mut rng);
            if order_entity_pairs(&p) != base {
                unstable += 1;
            }
        }
    }
    check(fig_ok && unstable == 0, format!("example order {seq:?}; 100 sentences × 5 permutations, {unstable} changed"))
}

fn complete(r: &EvalReport) -> bool {
    Setting::ALL.iter().all(|&s| {
        let rep = r.get(s);
        rep.overall_f1.is_finite() && rep.tasks().iter().all(|(_, t)| [t.precision, t.recall, t.f1].iter().all(|v| (0.0..=1.0).contains(v)))
    })
}

fn ablations() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let corpus = synthetic_corpus(dir.path())?;
    let variants = [
        ("full", Ablation::default()),
        ("-lstm_decoder", Ablation { no_lstm_decoder: true, ..Ablation::default() }),
        ("-connect_layernorm", Ablation { no_connect_layernorm: true, ..Ablation::default() }),
        ("-encoder_lstm", Ablation { plain_lstm: true, ..Ablation::default() }),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, ablation) in variants {
        let mut cfg = RunConfig::preset(Preset::Desk);
        cfg.model.ablation = ablation;
        cfg.model.epochs = 5;
        cfg.corpus = Some(corpus.clone());
        cfg.out_dir = dir.path().join(name);
        let run = cmd_train(&cfg, |_| {}).and_then(|s| {
            let r = cmd_eval(&s.checkpoint, &corpus, Some(&cfg.model))?;
            Ok((s.records.len(), r))
        });
        match run {
            Ok((epochs, r)) => {
                ok &= epochs == 5 && complete(&r);
                parts.push(format!("{name}: {epochs} epochs, strict overall {:.3}", r.strict.overall_f1));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{name}: {e:#}"));
            }
        }
    }
    check(ok, parts.join("; "))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let corpus = synthetic_corpus(dir.path())?;
    let run = |name: &str| -> Result<(Vec<u8>, Vec<u8>), String> {
        let mut cfg = RunConfig::preset(Preset::Desk);
        cfg.model.epochs = 3;
        cfg.seed = 12;
        cfg.corpus = Some(corpus.clone());
        cfg.out_dir = dir.path().join(name);
        let s = cmd_train(&cfg, |_| {}).map_err(err)?;
        Ok((fs::read(&s.log).map_err(err)?, fs::read(&s.checkpoint).map_err(err)?))
    };
    let (a, b) = (run("a")?, run("b")?);
    let logs = String::from_utf8_lossy(&a.0).lines().count();
    check(
        a.0 == b.0 && a.1 == b.1 && logs == 3,
        format!(
            "logs identical: {} ({logs} lines), checkpoints identical: {} ({} bytes)",
            a.0 == b.0,
            a.1 == b.1,
            a.1.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("gradient suite", gradient_suite),
        ("overfit oracle", overfit),
        ("redundancy exactness", redundancy),
        ("degeneracy equivalence", degeneracy),
        ("metric oracle equivalence", metric_oracle),
        ("probability/normalisation invariants", invariants),
        ("ordering determinism", ordering),
        ("ablation smoke", ablations),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {}. {name} [{secs:.1}s] {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {}. {name} [{secs:.1}s] {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
