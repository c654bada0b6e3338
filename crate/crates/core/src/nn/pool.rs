use alloc::vec::Vec;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};
use crate::rng::Rng;

use super::{name, Linear};

/// Additive attention pooling:
/// `score_i = vᵀ tanh(W L_i + b)`, `α = softmax(score)` over kept rows,
/// output `(Σ α_i L_i) P + c`.
#[derive(Debug, Clone)]
pub struct AttentionPool {
    pub score_hidden: Linear,
    pub score_vector: ParamId,
    pub projection: Linear,
}

impl AttentionPool {
    pub fn new(store: &mut ParamStore, prefix: &str, input_dim: usize, output_dim: usize, rng: &mut Rng) -> Self {
        AttentionPool {
            score_hidden: Linear::new(store, &name(prefix, "score"), input_dim, output_dim, rng),
            score_vector: store.add_xavier(name(prefix, "v"), output_dim, 1, rng),
            projection: Linear::new(store, &name(prefix, "proj"), input_dim, output_dim, rng),
        }
    }

    /// `rows: [l, f]` to `[1, output_dim]`.
    pub fn forward(&self, tape: &mut Tape<'_>, rows: Var, keep: Option<&[bool]>) -> Result<Var> {
        Ok(self.forward_with_weights(tape, rows, keep)?.0)
    }

    pub fn forward_with_weights(&self, tape: &mut Tape<'_>, rows: Var, keep: Option<&[bool]>) -> Result<(Var, Var)> {
        let shape: Vec<usize> = tape.shape(rows).to_vec();
        if shape.len() != 2 || shape[1] != self.score_hidden.input_dim {
            return Err(Error::dim("attention_pool", &shape, &[self.score_hidden.input_dim]));
        }
        if let Some(k) = keep {
            if k.len() != shape[0] {
                return Err(Error::dim("attention_pool mask", &shape, &[k.len()]));
            }
            if !k.iter().any(|b| *b) {
                return Err(Error::contract("attention pooling with every position masked"));
            }
        }
        let hidden = self.score_hidden.forward(tape, rows)?;
        let hidden = tape.tanh(hidden);
        let v = tape.param(self.score_vector);
        let scores = tape.matmul(hidden, v)?;
        let scores = tape.transpose(scores)?;
        let weights = tape.masked_softmax(scores, keep)?;
        let pooled = tape.matmul(weights, rows)?;
        Ok((self.projection.forward(tape, pooled)?, weights))
    }
}
