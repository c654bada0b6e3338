use alloc::vec::Vec;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::rng::Rng;

use super::{name, Linear};

/// Multi-head scaled dot-product self-attention.
///
/// Each head has width `ceil(model_dim / heads)`; when `heads` divides the
/// model width this is the usual `model_dim / heads` split.
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub heads: usize,
    pub head_dim: usize,
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
}

impl MultiHeadAttention {
    pub fn new(store: &mut ParamStore, prefix: &str, model_dim: usize, heads: usize, rng: &mut Rng) -> Self {
        assert!(heads > 0, "head count must be positive");
        let head_dim = model_dim.div_ceil(heads);
        let inner = head_dim * heads;
        MultiHeadAttention {
            heads,
            head_dim,
            query: Linear::new(store, &name(prefix, "wq"), model_dim, inner, rng),
            key: Linear::new(store, &name(prefix, "wk"), model_dim, inner, rng),
            value: Linear::new(store, &name(prefix, "wv"), model_dim, inner, rng),
            output: Linear::new(store, &name(prefix, "wo"), inner, model_dim, rng),
        }
    }

    /// `x: [l, model_dim]`; `keep[j] == false` hides key position `j`.
    pub fn forward(&self, tape: &mut Tape<'_>, x: Var, keep: Option<&[bool]>) -> Result<Var> {
        Ok(self.forward_with_weights(tape, x, keep)?.0)
    }

    /// Also returns each head's `[l, l]` attention weight matrix.
    pub fn forward_with_weights(&self, tape: &mut Tape<'_>, x: Var, keep: Option<&[bool]>) -> Result<(Var, Vec<Var>)> {
        let shape = tape.shape(x).to_vec();
        if shape.len() != 2 || shape[1] != self.query.input_dim {
            return Err(Error::dim("multi_head_self_attention", &shape, &[self.query.input_dim]));
        }
        if let Some(k) = keep {
            if k.len() != shape[0] {
                return Err(Error::dim("attention mask", &shape, &[k.len()]));
            }
            if !k.iter().any(|b| *b) {
                return Err(Error::contract("attention with every position masked"));
            }
        }
        let q = self.query.forward(tape, x)?;
        let k = self.key.forward(tape, x)?;
        let v = self.value.forward(tape, x)?;
        let scale = 1.0 / libm::sqrt(self.head_dim as f64);
        let mut heads = Vec::with_capacity(self.heads);
        let mut weights = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let start = h * self.head_dim;
            let qh = tape.slice(q, 1, start, self.head_dim)?;
            let kh = tape.slice(k, 1, start, self.head_dim)?;
            let vh = tape.slice(v, 1, start, self.head_dim)?;
            let kt = tape.transpose(kh)?;
            let scores = tape.matmul(qh, kt)?;
            let scores = tape.scale(scores, scale);
            let w = tape.masked_softmax(scores, keep)?;
            heads.push(tape.matmul(w, vh)?);
            weights.push(w);
        }
        let joined = tape.concat(&heads, 1)?;
        Ok((self.output.forward(tape, joined)?, weights))
    }
}
