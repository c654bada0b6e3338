//! The operations behind each subcommand, callable without a process.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, ensure, Context, Result};
use epex_core::checks::{gradient_suite, BlockCheck, SuiteOptions};
use epex_core::corpus::{
    build_vocab, generate_synthetic, split_folds, AnnotatedSentence, LabelCatalog, SynthSpec, Triple, Vocab, PAD,
};
use epex_core::eval::{corpus_redundancy, macro_average, triple_histogram, CorpusRedundancy, EvalReport, Histogram};
use epex_core::model::{decode_triples, JointModel, ModelConfig};
use epex_core::train::{evaluate_model, train, Dataset, EpochRecord, TrainOptions, TrainOutcome};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{self, Checkpoint};
use crate::config::RunConfig;
use crate::io::{load_corpus, parse_sentence, save_json, to_jsonl, write_atomic, LoadedCorpus};

pub const LOG_FILE: &str = "train_log.jsonl";

fn corpus_at(path: Option<&Path>, what: &str) -> Result<LoadedCorpus> {
    let path = path.with_context(|| format!("no {what} corpus given"))?;
    let loaded = load_corpus(path)?;
    for (line, w) in &loaded.warnings {
        eprintln!("warning: {}:{line}: {w}", path.display());
    }
    Ok(loaded)
}

/// A model fitted in memory, before anything is written.
pub struct Fitted {
    pub checkpoint: Checkpoint,
    pub outcome: TrainOutcome,
    /// Scores of the returned parameters on the training corpus.
    pub train_report: EvalReport,
}

/// Builds vocabulary and labels from the data and trains a fresh model.
pub fn fit(
    cfg: &RunConfig,
    seed: u64,
    corpus: &[AnnotatedSentence],
    validation: Option<&[AnnotatedSentence]>,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<Fitted> {
    ensure!(!corpus.is_empty(), "training corpus is empty");
    let vocab = build_vocab(corpus, cfg.min_count.max(1));
    let labelled: Vec<AnnotatedSentence> = corpus.iter().chain(validation.unwrap_or(&[])).cloned().collect();
    let catalog = LabelCatalog::from_corpus(&labelled)?;
    let config = cfg.model.clone().with_data(&catalog, vocab.len());
    config.validate()?;
    let (data, stats) = Dataset::encode(corpus, &vocab, &catalog, &config)?;
    if stats != Default::default() {
        eprintln!("note: encoding adjustments {stats:?}");
    }
    let val = match validation {
        Some(v) => Some(Dataset::encode(v, &vocab, &catalog, &config)?.0),
        None => None,
    };
    let mut model = JointModel::new(config, seed)?;
    let opts = TrainOptions {
        seed,
        eval_train: true,
        stop_when_perfect: cfg.stop_when_perfect,
    };
    let outcome = train(&mut model, &data, val.as_ref(), &catalog, &opts, on_epoch)?;
    let (train_report, _) = evaluate_model(&model, &data, &catalog)?;
    Ok(Fitted {
        checkpoint: Checkpoint { model, vocab, catalog },
        outcome,
        train_report,
    })
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub train_report: EvalReport,
    pub elapsed: Duration,
}

/// Trains on `cfg.corpus` and writes the best checkpoint and the epoch log.
/// Nothing is written unless training succeeds.
pub fn cmd_train(cfg: &RunConfig, on_epoch: impl FnMut(&EpochRecord)) -> Result<TrainSummary> {
    let start = Instant::now();
    let corpus = corpus_at(cfg.corpus.as_deref(), "training")?;
    let validation = match &cfg.validation {
        Some(p) => Some(corpus_at(Some(p), "validation")?.sentences),
        None => None,
    };
    let fitted = fit(cfg, cfg.seed, &corpus.sentences, validation.as_deref(), on_epoch)?;
    let log = cfg.out_dir.join(LOG_FILE);
    let ckpt = cfg.checkpoint_path();
    write_atomic(&log, to_jsonl(&fitted.outcome.records)?.as_bytes())?;
    let c = &fitted.checkpoint;
    checkpoint::save(&ckpt, &c.model, &c.vocab, &c.catalog)?;
    Ok(TrainSummary {
        checkpoint: ckpt,
        log,
        records: fitted.outcome.records,
        best_epoch: fitted.outcome.best_epoch,
        train_report: fitted.train_report,
        elapsed: start.elapsed(),
    })
}

/// Loads a checkpoint; when `expected` is given its dimensions must agree
/// with the stored model.
pub fn load_checkpoint(path: &Path, expected: Option<&ModelConfig>) -> Result<Checkpoint> {
    let ckpt = checkpoint::load(path)?;
    if let Some(expected) = expected {
        let expected = expected.clone().with_data(&ckpt.catalog, ckpt.vocab.len());
        let conflicts = expected.shape_conflicts(&ckpt.model.config);
        if !conflicts.is_empty() {
            bail!(
                "checkpoint {} does not match the configuration in: {}",
                path.display(),
                conflicts.join(", ")
            );
        }
    }
    Ok(ckpt)
}

/// Scores a checkpoint on a corpus in both matching settings.
pub fn cmd_eval(checkpoint: &Path, corpus: &Path, expected: Option<&ModelConfig>) -> Result<EvalReport> {
    let ckpt = load_checkpoint(checkpoint, expected)?;
    let corpus = corpus_at(Some(corpus), "evaluation")?;
    let config = &ckpt.model.config;
    let (data, _) = Dataset::encode(&corpus.sentences, &ckpt.vocab, &ckpt.catalog, config)?;
    Ok(evaluate_model(&ckpt.model, &data, &ckpt.catalog)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PredictLine {
    Triples { tokens: Vec<String>, triples: Vec<Triple> },
    Error { line: usize, error: String },
}

pub fn token_ids(tokens: &[String], vocab: &Vocab, max_len: usize) -> (Vec<usize>, usize) {
    let len = tokens.len().min(max_len);
    let mut ids: Vec<usize> = tokens[..len].iter().map(|t| vocab.id(t)).collect();
    ids.resize(max_len, PAD);
    (ids, len)
}

/// One output record per input line; malformed lines yield error records.
pub fn predict_lines(ckpt: &Checkpoint, text: &str) -> Vec<PredictLine> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let run = || -> Result<PredictLine> {
                let (sentence, _) = parse_sentence(line).map_err(anyhow::Error::msg)?;
                let (ids, len) = token_ids(&sentence.tokens, &ckpt.vocab, ckpt.model.config.max_len);
                let triples = if len == 0 {
                    Vec::new()
                } else {
                    decode_triples(&ckpt.model.predict(&ids, len)?, &ckpt.catalog).triples
                };
                Ok(PredictLine::Triples {
                    tokens: sentence.tokens,
                    triples,
                })
            };
            run().unwrap_or_else(|e| PredictLine::Error {
                line: i + 1,
                error: format!("{e:#}"),
            })
        })
        .collect()
}

pub fn cmd_predict(checkpoint: &Path, input: &Path, output: &Path, expected: Option<&ModelConfig>) -> Result<Vec<PredictLine>> {
    let ckpt = load_checkpoint(checkpoint, expected)?;
    let text = crate::io::read_text(input)?;
    let lines = predict_lines(&ckpt, &text);
    write_atomic(output, to_jsonl(&lines)?.as_bytes())?;
    Ok(lines)
}

#[derive(Debug, Clone)]
pub struct GradcheckSummary {
    pub blocks: Vec<BlockCheck>,
    pub elapsed: Duration,
}

impl GradcheckSummary {
    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.passed)
    }
}

pub fn cmd_gradcheck(opts: &SuiteOptions) -> Result<GradcheckSummary> {
    let start = Instant::now();
    let blocks = gradient_suite(opts)?;
    Ok(GradcheckSummary {
        blocks,
        elapsed: start.elapsed(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedundancyOutput {
    pub slots: usize,
    pub counts: CorpusRedundancy,
    pub histogram: Histogram,
}

pub fn cmd_redundancy(corpus: &Path, slots: usize) -> Result<RedundancyOutput> {
    let corpus = corpus_at(Some(corpus), "input")?.sentences;
    Ok(RedundancyOutput {
        slots,
        counts: corpus_redundancy(&corpus, slots)?,
        histogram: triple_histogram(&corpus),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub seed: u64,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub best_epoch: usize,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KfoldOutput {
    pub folds: Vec<FoldResult>,
    #[serde(rename = "macro")]
    pub macro_report: EvalReport,
}

/// Trains and tests once per fold with seed `cfg.seed + fold`.
pub fn cmd_kfold(cfg: &RunConfig, mut on_epoch: impl FnMut(usize, &EpochRecord)) -> Result<KfoldOutput> {
    let corpus = corpus_at(cfg.corpus.as_deref(), "input")?.sentences;
    ensure!(
        cfg.folds <= corpus.len(),
        "{} folds requested but the corpus has {} sentences",
        cfg.folds,
        corpus.len()
    );
    let folds = split_folds(corpus.len(), cfg.folds, cfg.seed)?;
    let mut results = Vec::with_capacity(folds.len());
    for (i, fold) in folds.into_iter().enumerate() {
        let pick = |idx: &[usize]| idx.iter().map(|&j| corpus[j].clone()).collect::<Vec<_>>();
        let (train_set, test_set) = (pick(&fold.train), pick(&fold.test));
        let seed = cfg.seed + i as u64;
        let fitted = fit(cfg, seed, &train_set, None, |r| on_epoch(i, r))?;
        let c = &fitted.checkpoint;
        let (test_data, _) = Dataset::encode(&test_set, &c.vocab, &c.catalog, &c.model.config)?;
        let report = evaluate_model(&c.model, &test_data, &c.catalog)?.0;
        write_atomic(
            &cfg.out_dir.join(format!("fold_{i}")).join(LOG_FILE),
            to_jsonl(&fitted.outcome.records)?.as_bytes(),
        )?;
        results.push(FoldResult {
            fold: i,
            seed,
            train: fold.train,
            test: fold.test,
            best_epoch: fitted.outcome.best_epoch,
            report,
        });
    }
    let reports: Vec<EvalReport> = results.iter().map(|r| r.report).collect();
    let out = KfoldOutput {
        macro_report: macro_average(&reports)?,
        folds: results,
    };
    save_json(&cfg.out_dir.join("kfold.json"), &out)?;
    Ok(out)
}

pub fn cmd_synth(spec: &SynthSpec, output: &Path) -> Result<Vec<AnnotatedSentence>> {
    let corpus = generate_synthetic(spec)?;
    write_atomic(output, to_jsonl(&corpus)?.as_bytes())?;
    Ok(corpus)
}

/// Hyperparameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SweepParam {
    Slots,
    EncoderLayers,
    HiddenDim,
}

impl SweepParam {
    fn apply(self, model: &mut ModelConfig, value: usize) {
        match self {
            SweepParam::Slots => model.slots = value,
            SweepParam::EncoderLayers => model.encoder_layers = value,
            SweepParam::HiddenDim => model.hidden_dim = value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: usize,
    /// `validation` when a validation corpus was given, else `train`.
    pub scored_on: String,
    pub ner_f1: f64,
    pub epe_f1: f64,
    pub rc_f1: f64,
    pub overall_f1: f64,
    pub relaxed_overall_f1: f64,
}

/// Trains one model per value and writes `sweep.csv` to the output directory.
pub fn cmd_sweep(cfg: &RunConfig, param: SweepParam, values: &[usize]) -> Result<Vec<SweepRow>> {
    ensure!(!values.is_empty(), "no sweep values given");
    let corpus = corpus_at(cfg.corpus.as_deref(), "training")?.sentences;
    let validation = match &cfg.validation {
        Some(p) => Some(corpus_at(Some(p), "validation")?.sentences),
        None => None,
    };
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let mut point = cfg.clone();
        param.apply(&mut point.model, value);
        let fitted = fit(&point, cfg.seed, &corpus, validation.as_deref(), |_| {})
            .with_context(|| format!("sweep point {param:?} = {value}"))?;
        let (report, scored_on) = match &validation {
            Some(v) => {
                let c = &fitted.checkpoint;
                let (data, _) = Dataset::encode(v, &c.vocab, &c.catalog, &c.model.config)?;
                (evaluate_model(&c.model, &data, &c.catalog)?.0, "validation")
            }
            None => (fitted.train_report, "train"),
        };
        rows.push(SweepRow {
            param,
            value,
            scored_on: scored_on.into(),
            ner_f1: report.strict.ner.f1,
            epe_f1: report.strict.epe.f1,
            rc_f1: report.strict.rc.f1,
            overall_f1: report.strict.overall_f1,
            relaxed_overall_f1: report.relaxed.overall_f1,
        });
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r)?;
    }
    write_atomic(&cfg.out_dir.join("sweep.csv"), &w.into_inner()?)?;
    Ok(rows)
}
