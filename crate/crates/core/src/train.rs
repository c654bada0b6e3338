//! Mini-batch training of the joint loss with per-epoch metrics.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{decode_tags, encode_sample, AnnotatedSentence, EncodeOptions, EncodeStats, EncodedSample, Extraction, LabelCatalog, Vocab};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport, Report};
use crate::model::{decode_triples, JointModel, LossValues, ModelConfig, RcMode};
use crate::nn::Mode;
use crate::optim::OptimizerState;
use crate::params::ParamStore;
use crate::rng::{stream, Stream};

/// Encoded samples together with their full gold annotations.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub samples: Vec<EncodedSample>,
    pub gold: Vec<Extraction>,
}

impl Dataset {
    pub fn encode(
        corpus: &[AnnotatedSentence],
        vocab: &Vocab,
        catalog: &LabelCatalog,
        config: &ModelConfig,
    ) -> Result<(Self, EncodeStats)> {
        let opts = encode_options(config);
        let mut stats = EncodeStats::default();
        let mut data = Dataset::default();
        for s in corpus {
            let (e, st) = encode_sample(s, vocab, catalog, &opts)?;
            stats.merge(&st);
            data.samples.push(e);
            data.gold.push(s.gold());
        }
        Ok((data, stats))
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

pub fn encode_options(config: &ModelConfig) -> EncodeOptions {
    EncodeOptions {
        max_len: config.max_len,
        slots: config.slots,
        group_relations: config.rc_mode == RcMode::SigmoidMultilabel,
    }
}

/// Decoded predictions for every sample.
pub fn predict_all(model: &JointModel, samples: &[EncodedSample], catalog: &LabelCatalog) -> Result<Vec<Extraction>> {
    samples
        .iter()
        .map(|s| {
            if s.len == 0 {
                return Ok(decode_tags(&[], &[], catalog));
            }
            let out = model.predict(&s.token_ids, s.len)?;
            Ok(decode_triples(&out, catalog))
        })
        .collect()
}

/// Strict and relaxed scores of the model on a dataset.
pub fn evaluate_model(model: &JointModel, data: &Dataset, catalog: &LabelCatalog) -> Result<(EvalReport, Vec<Extraction>)> {
    if data.is_empty() {
        return Err(Error::contract("evaluation corpus is empty"));
    }
    let pred = predict_all(model, &data.samples, catalog)?;
    Ok((evaluate(&data.gold, &pred)?, pred))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1s {
    pub ner: f64,
    pub epe: f64,
    pub rc: f64,
    pub overall: f64,
}

impl From<&Report> for F1s {
    fn from(r: &Report) -> Self {
        F1s {
            ner: r.ner.f1,
            epe: r.epe.f1,
            rc: r.rc.f1,
            overall: r.overall_f1,
        }
    }
}

/// One line of the training log. Losses are per-sample means over the
/// epoch; F1 values are strict and measured after the epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss_ner: f64,
    pub loss_epe: f64,
    pub loss_rc: f64,
    pub loss_all: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_f1: Option<F1s>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation_f1: Option<F1s>,
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub seed: u64,
    /// Score the training set after every epoch.
    pub eval_train: bool,
    /// Stop once the training set is scored perfectly on every task.
    pub stop_when_perfect: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            seed: 0,
            eval_train: true,
            stop_when_perfect: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub records: Vec<EpochRecord>,
    /// Epoch whose parameters the model holds on return (1-based).
    pub best_epoch: usize,
    /// Strict overall F1 used to pick `best_epoch`: validation if given,
    /// else training.
    pub best_f1: Option<f64>,
    pub stopped_early: bool,
}

/// Trains `model` for up to `config.epochs` epochs and leaves it holding
/// the parameters of the best epoch.
pub fn train(
    model: &mut JointModel,
    data: &Dataset,
    validation: Option<&Dataset>,
    catalog: &LabelCatalog,
    opts: &TrainOptions,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(Error::contract("training corpus is empty"));
    }
    if validation.is_some_and(Dataset::is_empty) {
        return Err(Error::contract("validation corpus is empty"));
    }
    let config = model.config.clone();
    let mut optimizer = OptimizerState::new(config.optimizer, config.learning_rate, &model.store)?;
    optimizer.weight_decay = config.weight_decay;
    let mut shuffle = stream(opts.seed, Stream::Shuffle);
    let mut mode = Mode::training(stream(opts.seed, Stream::Dropout));
    let mut order: Vec<usize> = (0..data.len()).collect();

    let mut records = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let mut stopped_early = false;
    model.store.zero_grads();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle);
        let mut epoch_loss = LossValues::default();
        for batch in order.chunks(config.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let (values, grads) = model.loss_and_gradients(&data.samples[i], &mut mode, scale)?;
                model.store.accumulate(&grads);
                epoch_loss.add_scaled(&values, 1.0 / data.len() as f64);
            }
            optimizer.step(&mut model.store)?;
            model.store.zero_grads();
        }

        let train_report = if opts.eval_train || opts.stop_when_perfect {
            Some(evaluate_model(model, data, catalog)?.0)
        } else {
            None
        };
        let val_report = match validation {
            Some(v) => Some(evaluate_model(model, v, catalog)?.0),
            None => None,
        };
        let record = EpochRecord {
            epoch,
            loss_ner: epoch_loss.ner,
            loss_epe: epoch_loss.epe,
            loss_rc: epoch_loss.rc,
            loss_all: epoch_loss.all,
            train_f1: train_report.as_ref().map(|r| F1s::from(&r.strict)),
            validation_f1: val_report.as_ref().map(|r| F1s::from(&r.strict)),
        };
        on_epoch(&record);
        records.push(record);

        let selection = val_report.or(train_report).map(|r| r.strict.overall_f1);
        if let Some(f1) = selection {
            if best.as_ref().map_or(true, |b| f1 > b.0) {
                best = Some((f1, epoch, model.store.clone()));
            }
        }
        if opts.stop_when_perfect && train_report.is_some_and(|r| r.strict.is_perfect()) {
            stopped_early = epoch < config.epochs;
            break;
        }
    }

    let last = records.len();
    let (best_epoch, best_f1) = match best {
        Some((f1, epoch, store)) => {
            if epoch != last {
                model.store.load_values(&store)?;
            }
            (epoch, Some(f1))
        }
        None => (last, None),
    };
    Ok(TrainOutcome {
        records,
        best_epoch,
        best_f1,
        stopped_early,
    })
}
