use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::AnnotatedSentence;
use crate::error::{Error, Result};

/// How many relation classifications an extraction scheme performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// One per token pair: `m(m−1)/2`.
    TableFilling,
    /// One per ordered entity pair: `k²`.
    Pairwise,
    /// One per slot: `n`.
    SlotBased,
}

fn overflow() -> Error {
    Error::contract("redundancy count overflows i64")
}

/// Exact integer count for one sentence of `m` tokens and `k` entities with
/// `n` slots. Only the argument the method uses is checked.
pub fn redundancy_count(method: Method, m: i64, k: i64, n: i64) -> Result<i64> {
    match method {
        Method::TableFilling => {
            if m < 1 {
                return Err(Error::contract("table filling needs m >= 1"));
            }
            // one of m, m-1 is even, so halve that one first
            let (a, b) = if m % 2 == 0 { (m / 2, m - 1) } else { (m, (m - 1) / 2) };
            a.checked_mul(b).ok_or_else(overflow)
        }
        Method::Pairwise => {
            if k < 0 {
                return Err(Error::contract("pairwise needs k >= 0"));
            }
            k.checked_mul(k).ok_or_else(overflow)
        }
        Method::SlotBased => {
            if n < 1 {
                return Err(Error::contract("slot-based needs n >= 1"));
            }
            Ok(n)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedundancyReport {
    pub m: i64,
    pub k: i64,
    pub n: i64,
    pub table_filling: i64,
    pub pairwise: i64,
    pub slot_based: i64,
}

impl RedundancyReport {
    pub fn new(m: i64, k: i64, n: i64) -> Result<Self> {
        Ok(RedundancyReport {
            m,
            k,
            n,
            table_filling: redundancy_count(Method::TableFilling, m, k, n)?,
            pairwise: redundancy_count(Method::Pairwise, m, k, n)?,
            slot_based: redundancy_count(Method::SlotBased, m, k, n)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRedundancy {
    pub samples: Vec<RedundancyReport>,
    pub table_filling: i64,
    pub pairwise: i64,
    pub slot_based: i64,
}

/// Per-sentence counts (`m` = token count, `k` = entity count) and totals.
pub fn corpus_redundancy(corpus: &[AnnotatedSentence], n: usize) -> Result<CorpusRedundancy> {
    let as_i64 = |v: usize| i64::try_from(v).map_err(|_| overflow());
    let mut out = CorpusRedundancy {
        samples: Vec::with_capacity(corpus.len()),
        table_filling: 0,
        pairwise: 0,
        slot_based: 0,
    };
    for s in corpus {
        let r = RedundancyReport::new(as_i64(s.tokens.len())?, as_i64(s.entities.len())?, as_i64(n)?)?;
        out.table_filling = out.table_filling.checked_add(r.table_filling).ok_or_else(overflow)?;
        out.pairwise = out.pairwise.checked_add(r.pairwise).ok_or_else(overflow)?;
        out.slot_based = out.slot_based.checked_add(r.slot_based).ok_or_else(overflow)?;
        out.samples.push(r);
    }
    Ok(out)
}

/// Sentences per triple count, as counts and as fractions of the corpus.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Histogram {
    pub counts: BTreeMap<usize, usize>,
    pub fractions: BTreeMap<usize, f64>,
}

pub fn triple_histogram(corpus: &[AnnotatedSentence]) -> Histogram {
    let mut counts = BTreeMap::new();
    for s in corpus {
        *counts.entry(s.relations.len()).or_insert(0usize) += 1;
    }
    let total = corpus.len() as f64;
    let fractions = counts.iter().map(|(&k, &c)| (k, c as f64 / total)).collect();
    Histogram { counts, fractions }
}
