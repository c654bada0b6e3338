use alloc::vec::Vec;

use super::{Forward, RcMode};
use crate::autodiff::Tape;
use crate::corpus::{decode_tags, Extraction, LabelCatalog, SlotTags};
use crate::error::Result;
use crate::tensor::Tensor;

/// Detached outputs of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutput {
    /// Real token count; rows beyond it are padding.
    pub len: usize,
    /// `N`, `[rows, n_t]`.
    pub ner: Tensor,
    /// `Z`, `[rows, d + n_t]`.
    pub z: Tensor,
    /// `H`, `[n, rows, d_w]`.
    pub h: Tensor,
    /// `M`, `[n, rows, n_d]`.
    pub m: Tensor,
    /// `P`, `[n, n_r]`.
    pub p: Tensor,
    pub rc_mode: RcMode,
}

fn stack(tape: &Tape<'_>, parts: &[crate::autodiff::Var]) -> Result<Tensor> {
    let inner = tape.shape(parts[0]).to_vec();
    let mut shape = alloc::vec![parts.len()];
    shape.extend_from_slice(&inner);
    let data: Vec<f64> = parts.iter().flat_map(|v| tape.value(*v).iter().copied()).collect();
    Tensor::new(&shape, data)
}

impl ModelOutput {
    pub fn from_forward(tape: &Tape<'_>, fwd: &Forward, rc_mode: RcMode) -> Result<Self> {
        Ok(ModelOutput {
            len: fwd.len,
            ner: tape.tensor(fwd.n),
            z: tape.tensor(fwd.z),
            h: stack(tape, &fwd.h)?,
            m: stack(tape, &fwd.m)?,
            p: tape.tensor(fwd.p),
            rc_mode,
        })
    }

    pub fn slots(&self) -> usize {
        self.p.shape()[0]
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Threshold for a relation in multi-label mode.
pub const MULTILABEL_THRESHOLD: f64 = 0.5;

/// Argmax decoding of a model output into entities, pairs and triples.
/// Pure in `output`; malformed tag sequences just yield fewer units.
pub fn decode_triples(output: &ModelOutput, catalog: &LabelCatalog) -> Extraction {
    let len = output.len;
    let n_t = output.ner.shape()[1];
    let ner: Vec<usize> = output.ner.data().chunks(n_t).take(len).map(argmax).collect();
    let (slots, rows, n_d) = (output.m.shape()[0], output.m.shape()[1], output.m.shape()[2]);
    let n_r = output.p.shape()[1];
    let tags: Vec<SlotTags> = (0..slots)
        .map(|t| {
            let block = &output.m.data()[t * rows * n_d..(t + 1) * rows * n_d];
            let roles = block.chunks(n_d).take(len).map(argmax).collect();
            let probs = &output.p.data()[t * n_r..(t + 1) * n_r];
            let relations = match output.rc_mode {
                RcMode::SoftmaxMulticlass => alloc::vec![argmax(probs)],
                RcMode::SigmoidMultilabel => (0..n_r).filter(|&r| probs[r] > MULTILABEL_THRESHOLD).collect(),
            };
            SlotTags { roles, relations }
        })
        .collect();
    decode_tags(&ner, &tags, catalog)
}
