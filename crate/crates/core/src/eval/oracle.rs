//! Brute-force reference scorer for small inputs.
//!
//! Written independently of [`score`](super::score): correctness predicates
//! are restated from their definitions and the credited units are found by
//! exhaustive search over all one-to-one assignments.

use alloc::vec::Vec;

use super::{Report, Setting, TaskScore};
use crate::corpus::{Extraction, Span};

/// A unit reduced to comparable parts: argument spans plus an optional
/// relation label.
#[derive(Clone, PartialEq)]
struct Unit<'a> {
    spans: Vec<&'a Span>,
    label: Option<&'a str>,
}

fn correct(gold: &Unit<'_>, pred: &Unit<'_>, setting: Setting) -> bool {
    if gold.label != pred.label || gold.spans.len() != pred.spans.len() {
        return false;
    }
    gold.spans.iter().zip(&pred.spans).all(|(g, p)| {
        let same_type = g.kind == p.kind;
        match setting {
            Setting::Strict => same_type && g.start == p.start && g.end == p.end,
            // some token position lies inside both spans
            Setting::Relaxed => same_type && (g.start..g.end).any(|i| p.start <= i && i < p.end),
        }
    })
}

fn best(gold: &[Unit<'_>], pred: &[Unit<'_>], used: &mut Vec<bool>, g: usize, setting: Setting) -> usize {
    if g == gold.len() {
        return 0;
    }
    let mut top = best(gold, pred, used, g + 1, setting);
    for p in 0..pred.len() {
        if !used[p] && correct(&gold[g], &pred[p], setting) {
            used[p] = true;
            top = top.max(1 + best(gold, pred, used, g + 1, setting));
            used[p] = false;
        }
    }
    top
}

fn tally(gold: Vec<Unit<'_>>, pred: Vec<Unit<'_>>, setting: Setting) -> (usize, usize, usize) {
    let mut distinct_gold: Vec<Unit<'_>> = Vec::new();
    for u in gold {
        if !distinct_gold.contains(&u) {
            distinct_gold.push(u);
        }
    }
    let mut distinct_pred: Vec<Unit<'_>> = Vec::new();
    let mut copies = 0;
    for u in pred {
        if distinct_pred.contains(&u) {
            copies += 1;
        } else {
            distinct_pred.push(u);
        }
    }
    let mut used = alloc::vec![false; distinct_pred.len()];
    let tp = best(&distinct_gold, &distinct_pred, &mut used, 0, setting);
    (tp, distinct_pred.len() + copies - tp, distinct_gold.len() - tp)
}

fn entities(x: &Extraction) -> Vec<Unit<'_>> {
    x.entities
        .iter()
        .map(|s| Unit {
            spans: alloc::vec![s],
            label: None,
        })
        .collect()
}

fn pairs(x: &Extraction) -> Vec<Unit<'_>> {
    x.pairs
        .iter()
        .map(|p| Unit {
            spans: alloc::vec![&p.subject, &p.predicate],
            label: None,
        })
        .collect()
}

fn triples(x: &Extraction) -> Vec<Unit<'_>> {
    x.triples
        .iter()
        .map(|t| Unit {
            spans: alloc::vec![&t.subject, &t.predicate],
            label: Some(t.relation.as_str()),
        })
        .collect()
}

fn task(gold: &[Extraction], pred: &[Extraction], setting: Setting, units: fn(&Extraction) -> Vec<Unit<'_>>) -> TaskScore {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (g, p) in gold.iter().zip(pred) {
        let c = tally(units(g), units(p), setting);
        tp += c.0;
        fp += c.1;
        fn_ += c.2;
    }
    let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    TaskScore {
        tp,
        fp,
        fn_,
        precision: p,
        recall: r,
        f1: f,
    }
}

/// Exhaustive scorer; exponential in the number of units per sentence.
/// Inputs of different lengths are scored over their common prefix.
pub fn brute_force_score(gold: &[Extraction], pred: &[Extraction], setting: Setting) -> Report {
    let ner = task(gold, pred, setting, entities);
    let epe = task(gold, pred, setting, pairs);
    let rc = task(gold, pred, setting, triples);
    Report {
        ner,
        epe,
        rc,
        overall_f1: (ner.f1 + epe.f1 + rc.f1) / 3.0,
    }
}
