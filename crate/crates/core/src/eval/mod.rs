//! Precision/recall/F1 for the three tasks under strict and relaxed
//! matching, fold averaging, and the relation-classification workload of
//! different extraction schemes.

mod matching;
pub mod oracle;
mod redundancy;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::Extraction;
use crate::error::{Error, Result};

pub use matching::score;
pub use redundancy::{corpus_redundancy, redundancy_count, triple_histogram, CorpusRedundancy, Histogram, Method, RedundancyReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    /// Exact boundaries and types.
    Strict,
    /// Spans need only share a token; types must agree.
    Relaxed,
}

impl Setting {
    pub const ALL: [Setting; 2] = [Setting::Strict, Setting::Relaxed];
}

/// `2PR / (P + R)`, or 0 when `P + R = 0`.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TaskScore {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl TaskScore {
    /// Precision is 0 when nothing was predicted, recall 0 when there was
    /// nothing to find.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        TaskScore {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1: f1_score(precision, recall),
        }
    }
}

/// Scores for one setting. `overall_f1` is the plain mean of the three task
/// F1 values.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Report {
    pub ner: TaskScore,
    pub epe: TaskScore,
    pub rc: TaskScore,
    pub overall_f1: f64,
}

impl Report {
    pub fn new(ner: TaskScore, epe: TaskScore, rc: TaskScore) -> Self {
        Report {
            ner,
            epe,
            rc,
            overall_f1: (ner.f1 + epe.f1 + rc.f1) / 3.0,
        }
    }

    pub fn tasks(&self) -> [(&'static str, &TaskScore); 3] {
        [("NER", &self.ner), ("EPE", &self.epe), ("RC", &self.rc)]
    }

    /// Every task has F1 = 1.
    pub fn is_perfect(&self) -> bool {
        self.tasks().iter().all(|(_, t)| t.f1 == 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub strict: Report,
    pub relaxed: Report,
}

impl EvalReport {
    pub fn get(&self, setting: Setting) -> &Report {
        match setting {
            Setting::Strict => &self.strict,
            Setting::Relaxed => &self.relaxed,
        }
    }
}

/// Running mean over the sorted values: independent of input order, and
/// exact when all values are equal.
fn mean(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let mut m = 0.0;
    for (i, v) in values.into_iter().enumerate() {
        m += (v - m) / (i + 1) as f64;
    }
    m
}

fn mean_task(scores: &[&TaskScore]) -> TaskScore {
    TaskScore {
        tp: scores.iter().map(|s| s.tp).sum(),
        fp: scores.iter().map(|s| s.fp).sum(),
        fn_: scores.iter().map(|s| s.fn_).sum(),
        precision: mean(scores.iter().map(|s| s.precision).collect()),
        recall: mean(scores.iter().map(|s| s.recall).collect()),
        f1: mean(scores.iter().map(|s| s.f1).collect()),
    }
}

fn mean_report(reports: &[&Report]) -> Report {
    let pick = |f: fn(&Report) -> &TaskScore| mean_task(&reports.iter().map(|r| f(r)).collect::<Vec<_>>());
    Report::new(pick(|r| &r.ner), pick(|r| &r.epe), pick(|r| &r.rc))
}

/// Fold average: P, R and F1 are arithmetic means over the folds; counts
/// are summed.
pub fn macro_average(reports: &[EvalReport]) -> Result<EvalReport> {
    if reports.is_empty() {
        return Err(Error::contract("macro average of zero reports"));
    }
    Ok(EvalReport {
        strict: mean_report(&reports.iter().map(|r| &r.strict).collect::<Vec<_>>()),
        relaxed: mean_report(&reports.iter().map(|r| &r.relaxed).collect::<Vec<_>>()),
    })
}

/// Scores aligned gold and predicted extractions under both settings.
pub fn evaluate(gold: &[Extraction], pred: &[Extraction]) -> Result<EvalReport> {
    Ok(EvalReport {
        strict: score(gold, pred, Setting::Strict)?,
        relaxed: score(gold, pred, Setting::Relaxed)?,
    })
}
