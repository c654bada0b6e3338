use alloc::vec;
use alloc::vec::Vec;

use super::{Report, Setting, TaskScore};
use crate::corpus::{Extraction, Pair, Span, Triple};
use crate::error::{Error, Result};

fn span_match(g: &Span, p: &Span, setting: Setting) -> bool {
    match setting {
        Setting::Strict => g == p,
        Setting::Relaxed => g.kind == p.kind && g.overlaps(p),
    }
}

fn pair_match(g: &Pair, p: &Pair, setting: Setting) -> bool {
    span_match(&g.subject, &p.subject, setting) && span_match(&g.predicate, &p.predicate, setting)
}

fn triple_match(g: &Triple, p: &Triple, setting: Setting) -> bool {
    g.relation == p.relation
        && span_match(&g.subject, &p.subject, setting)
        && span_match(&g.predicate, &p.predicate, setting)
}

/// Removes exact repeats, keeping first occurrences; returns how many were
/// removed.
fn dedup<T: PartialEq + Clone>(items: &[T]) -> (Vec<T>, usize) {
    let mut out: Vec<T> = Vec::with_capacity(items.len());
    for it in items {
        if !out.contains(it) {
            out.push(it.clone());
        }
    }
    let removed = items.len() - out.len();
    (out, removed)
}

/// Maximum bipartite matching by augmenting paths.
fn max_matching(edges: &[Vec<usize>], right: usize) -> usize {
    fn augment(u: usize, edges: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &v in &edges[u] {
            if seen[v] {
                continue;
            }
            seen[v] = true;
            let free = match owner[v] {
                None => true,
                Some(w) => augment(w, edges, seen, owner),
            };
            if free {
                owner[v] = Some(u);
                return true;
            }
        }
        false
    }
    let mut owner = vec![None; right];
    let mut matched = 0;
    for u in 0..edges.len() {
        let mut seen = vec![false; right];
        if augment(u, edges, &mut seen, &mut owner) {
            matched += 1;
        }
    }
    matched
}

/// `(tp, fp, fn)` for one sentence and one unit kind.
fn counts<T: PartialEq + Clone>(gold: &[T], pred: &[T], matches: impl Fn(&T, &T) -> bool) -> (usize, usize, usize) {
    let (gold, _) = dedup(gold);
    let (pred_unique, repeats) = dedup(pred);
    let edges: Vec<Vec<usize>> = pred_unique
        .iter()
        .map(|p| (0..gold.len()).filter(|&g| matches(&gold[g], p)).collect())
        .collect();
    let tp = max_matching(&edges, gold.len());
    (tp, pred_unique.len() - tp + repeats, gold.len() - tp)
}

/// Micro-averaged scores of aligned gold and predicted extractions.
///
/// Within a sentence each gold unit can be credited to at most one
/// prediction and vice versa, maximising the number of credited pairs.
/// Repeated identical predictions count as false positives.
pub fn score(gold: &[Extraction], pred: &[Extraction], setting: Setting) -> Result<Report> {
    if gold.len() != pred.len() {
        return Err(Error::contract(alloc::format!(
            "{} gold sentences but {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    let mut totals = [(0, 0, 0); 3];
    for (g, p) in gold.iter().zip(pred) {
        let per = [
            counts(&g.entities, &p.entities, |a, b| span_match(a, b, setting)),
            counts(&g.pairs, &p.pairs, |a, b| pair_match(a, b, setting)),
            counts(&g.triples, &p.triples, |a, b| triple_match(a, b, setting)),
        ];
        for (t, c) in totals.iter_mut().zip(per) {
            t.0 += c.0;
            t.1 += c.1;
            t.2 += c.2;
        }
    }
    let [ner, epe, rc] = totals.map(|(tp, fp, fn_)| TaskScore::from_counts(tp, fp, fn_));
    Ok(Report::new(ner, epe, rc))
}
