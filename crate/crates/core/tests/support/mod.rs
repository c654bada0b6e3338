//! Oracles and random generators shared by integration tests and the
//! acceptance runner. Everything here is written against the public API
//! only and recomputes expected values from first principles.
#![allow(dead_code)]

use epex_core::corpus::{AnnotatedSentence, Entity, Extraction, Pair, Relation, Span, Triple};
use epex_core::encoder_lstm::{EncoderLstm, EncoderLstmState};
use epex_core::eval::oracle::brute_force_score;
use epex_core::eval::{f1_score, score, Report, Setting};
use epex_core::nn::{Mode, LN_EPS};
use epex_core::rng::{stream, Rng, Stream};
use epex_core::{ParamStore, Tape, Tensor};
use rand::seq::SliceRandom;
use rand::Rng as _;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Plain per-token LSTM step over `[z_row; h_row]` with gate weights read
/// straight out of the store as row-major `(in, hid)` matrices.
fn plain_lstm_step(store: &ParamStore, cell: &EncoderLstm, z: &Tensor, h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (l, zd, hid) = (z.shape()[0], z.shape()[1], cell.hidden_dim);
    let width = zd + hid;
    let mut h_next = vec![0.0; l * hid];
    let mut c_next = vec![0.0; l * hid];
    for tok in 0..l {
        let mut x = Vec::with_capacity(width);
        x.extend_from_slice(z.row(tok));
        x.extend_from_slice(&h[tok * hid..(tok + 1) * hid]);
        let gate = |g: usize| -> Vec<f64> {
            let w = store.tensor(cell.projections[g].weight).data();
            let b = store.tensor(cell.projections[g].bias).data();
            (0..hid)
                .map(|j| {
                    let mut acc = b[j];
                    for (k, xv) in x.iter().enumerate() {
                        acc += xv * w[k * hid + j];
                    }
                    acc
                })
                .collect()
        };
        let (i, f, o, g) = (gate(0), gate(1), gate(2), gate(3));
        for j in 0..hid {
            let k = tok * hid + j;
            let cn = sigmoid(i[j]) * g[j].tanh() + c[k] * sigmoid(f[j]);
            c_next[k] = cn;
            h_next[k] = sigmoid(o[j]) * cn.tanh();
        }
    }
    (h_next, c_next)
}

/// Largest deviation between a zero-layer Encoder-LSTM and the plain LSTM
/// reference over `draws` random shapes, parameters and inputs, unrolled
/// three steps each.
pub fn degeneracy_max_deviation(draws: u64) -> f64 {
    let mut worst = 0.0f64;
    for draw in 0..draws {
        let mut rng = stream(draw, Stream::Synthetic);
        let l = rng.gen_range(1..=6);
        let zd = rng.gen_range(1..=7);
        let hid = rng.gen_range(1..=6);
        let mut init = stream(draw, Stream::Init);
        let mut store = ParamStore::new();
        let cell = EncoderLstm::new(&mut store, "cell", zd, hid, 1, 0, 0.0, &mut init);
        // randomise biases too so every term of the gate sum is exercised
        for id in store.ids().collect::<Vec<_>>() {
            for v in store.get_mut(id).tensor.data_mut() {
                *v = rng.gen_range(-1.5..1.5);
            }
        }
        let z = Tensor::new(&[l, zd], (0..l * zd).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();

        let mut t = Tape::with_params(&store);
        let zv = t.input(&z);
        let mut state = EncoderLstmState::zeros(&mut t, l, hid).unwrap();
        let mut h = vec![0.0; l * hid];
        let mut c = vec![0.0; l * hid];
        for _ in 0..3 {
            state = cell.step(&mut t, zv, state, None, &mut Mode::inference()).unwrap();
            (h, c) = plain_lstm_step(&store, &cell, &z, &h, &c);
            for (a, b) in t.value(state.h).iter().zip(&h) {
                worst = worst.max((a - b).abs());
            }
            for (a, b) in t.value(state.c).iter().zip(&c) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    worst
}

const TYPES: [&str; 2] = ["A", "B"];
const RELATIONS: [&str; 2] = ["r1", "r2"];

fn random_span(rng: &mut Rng) -> Span {
    let start = rng.gen_range(0..6);
    Span::new(start, start + rng.gen_range(1..=2), TYPES[rng.gen_range(0..2)])
}

/// A small random extraction over a tiny span universe, so that exact and
/// overlapping matches are both common.
pub fn random_extraction(rng: &mut Rng, max_items: usize) -> Extraction {
    let mut x = Extraction::default();
    for _ in 0..rng.gen_range(0..=max_items) {
        x.entities.push(random_span(rng));
    }
    for _ in 0..rng.gen_range(0..=max_items) {
        let (subject, predicate) = (random_span(rng), random_span(rng));
        x.pairs.push(Pair {
            subject: subject.clone(),
            predicate: predicate.clone(),
        });
        x.triples.push(Triple {
            subject,
            predicate,
            relation: RELATIONS[rng.gen_range(0..2)].into(),
        });
    }
    x
}

/// Prediction derived from gold: some items kept, some perturbed, some
/// repeated, and sometimes nothing at all.
pub fn random_prediction(rng: &mut Rng, gold: &Extraction) -> Extraction {
    if rng.gen_bool(0.15) {
        return Extraction::default();
    }
    let mut x = random_extraction(rng, 2);
    let keep = |rng: &mut Rng| rng.gen_bool(0.6);
    x.entities.extend(gold.entities.iter().filter(|_| keep(rng)).cloned());
    x.pairs.extend(gold.pairs.iter().filter(|_| keep(rng)).cloned());
    x.triples.extend(gold.triples.iter().filter(|_| keep(rng)).cloned());
    if rng.gen_bool(0.3) {
        if let Some(e) = x.entities.first().cloned() {
            x.entities.push(e);
        }
        if let Some(t) = x.triples.first().cloned() {
            x.triples.push(t);
        }
    }
    x.entities.shuffle(rng);
    x.pairs.shuffle(rng);
    x.triples.shuffle(rng);
    x
}

pub struct OracleTrials {
    pub trials: usize,
    pub mismatches: usize,
    /// Trials where relaxed TP fell below strict TP on some task.
    pub relaxed_below_strict: usize,
    pub empty_predictions: usize,
    pub duplicate_predictions: usize,
}

fn tps(r: &Report) -> [usize; 3] {
    [r.ner.tp, r.epe.tp, r.rc.tp]
}

fn has_duplicates<T: Ord + Clone>(items: &[T]) -> bool {
    let mut v = items.to_vec();
    v.sort();
    v.windows(2).any(|w| w[0] == w[1])
}

/// Runs `trials` random corpora of 1–4 sentences through `score` and the
/// exhaustive oracle for `setting`.
pub fn oracle_trials(seed: u64, trials: usize, setting: Setting) -> OracleTrials {
    let mut rng = stream(seed, Stream::Synthetic);
    let mut out = OracleTrials {
        trials,
        mismatches: 0,
        relaxed_below_strict: 0,
        empty_predictions: 0,
        duplicate_predictions: 0,
    };
    for _ in 0..trials {
        let n = rng.gen_range(1..=4);
        let gold: Vec<Extraction> = (0..n).map(|_| random_extraction(&mut rng, 3)).collect();
        let pred: Vec<Extraction> = gold.iter().map(|g| random_prediction(&mut rng, g)).collect();
        out.empty_predictions += pred.iter().filter(|p| *p == &Extraction::default()).count();
        out.duplicate_predictions += pred
            .iter()
            .filter(|p| has_duplicates(&p.entities) || has_duplicates(&p.triples))
            .count();
        let fast = score(&gold, &pred, setting).unwrap();
        if fast != brute_force_score(&gold, &pred, setting) {
            out.mismatches += 1;
        }
        let strict = score(&gold, &pred, Setting::Strict).unwrap();
        let relaxed = score(&gold, &pred, Setting::Relaxed).unwrap();
        if tps(&relaxed).iter().zip(tps(&strict)).any(|(r, s)| *r < s) {
            out.relaxed_below_strict += 1;
        }
    }
    out
}

/// Random sentence with non-overlapping entities and 0–5 relations
/// (duplicates allowed).
pub fn random_sentence(rng: &mut Rng) -> AnnotatedSentence {
    let len = rng.gen_range(2..=16);
    let tokens: Vec<String> = (0..len).map(|i| format!("w{i}")).collect();
    let mut entities = Vec::new();
    let mut pos = 0;
    while pos < len {
        pos += rng.gen_range(0..=2);
        if pos >= len {
            break;
        }
        let end = (pos + rng.gen_range(1..=2)).min(len);
        entities.push(Entity {
            start: pos,
            end,
            kind: TYPES[rng.gen_range(0..2)].into(),
        });
        pos = end;
    }
    let mut relations = Vec::new();
    if entities.len() >= 2 {
        for _ in 0..rng.gen_range(0..=5) {
            let head = rng.gen_range(0..entities.len());
            let mut tail = rng.gen_range(0..entities.len() - 1);
            if tail >= head {
                tail += 1;
            }
            relations.push(Relation {
                head,
                tail,
                kind: RELATIONS[rng.gen_range(0..2)].into(),
            });
        }
    }
    AnnotatedSentence {
        tokens,
        entities,
        relations,
    }
}

fn random_tensor(rng: &mut Rng, rows: usize, cols: usize, scale: f64) -> Tensor {
    Tensor::new(&[rows, cols], (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
}

/// Largest |row sum − 1| of the tape's softmax over random matrices with
/// logits up to ±50.
pub fn softmax_max_row_error(seed: u64, trials: usize) -> f64 {
    let mut rng = stream(seed, Stream::Synthetic);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let (r, c) = (rng.gen_range(1..=8), rng.gen_range(1..=12));
        let x = random_tensor(&mut rng, r, c, 50.0);
        let mut t = Tape::new();
        let v = t.input(&x);
        let y = t.softmax(v).unwrap();
        for row in t.value(y).chunks(c) {
            worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
        }
    }
    worst
}

/// Largest |row mean| of the tape's layer norm with unit gain and zero
/// bias, i.e. of the normalised rows before the affine step.
pub fn layer_norm_max_mean(seed: u64, trials: usize) -> f64 {
    let mut rng = stream(seed, Stream::Synthetic);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let (r, c) = (rng.gen_range(1..=8), rng.gen_range(2..=12));
        let shift = rng.gen_range(-100.0..100.0);
        let mut x = random_tensor(&mut rng, r, c, 10.0);
        x.data_mut().iter_mut().for_each(|v| *v += shift);
        let mut t = Tape::new();
        let v = t.input(&x);
        let g = t.input(&Tensor::full(&[c], 1.0));
        let b = t.input(&Tensor::zeros(&[c]));
        let y = t.layer_norm(v, g, b, LN_EPS).unwrap();
        for row in t.value(y).chunks(c) {
            worst = worst.max((row.iter().sum::<f64>() / c as f64).abs());
        }
    }
    worst
}

/// Largest disagreement between `f1_score` and the harmonic mean of P and
/// R on a grid over [0, 1]², with the P + R = 0 point (and any zero
/// argument) required to give exactly 0.
pub fn f1_grid_max_error(steps: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..=steps {
        for j in 0..=steps {
            let (p, r) = (i as f64 / steps as f64, j as f64 / steps as f64);
            let got = f1_score(p, r);
            let want = if p == 0.0 || r == 0.0 { 0.0 } else { 2.0 / (1.0 / p + 1.0 / r) };
            if (p == 0.0 || r == 0.0) && got != 0.0 {
                return f64::INFINITY;
            }
            worst = worst.max((got - want).abs());
        }
    }
    worst
}
