use alloc::vec::Vec;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::rng::Rng;

use super::{name, LayerNorm, Linear, Mode, MultiHeadAttention};

/// Feed-forward inner width as a multiple of the model width.
pub const FF_MULTIPLIER: usize = 4;

/// One post-norm Transformer encoder layer:
/// `x ← LN(x + Drop(MHA(x)))`, then `x ← LN(x + Drop(W₂ ReLU(W₁ x)))`.
#[derive(Debug, Clone)]
pub struct EncoderLayer {
    pub attention: MultiHeadAttention,
    pub norm_attention: LayerNorm,
    pub ff_in: Linear,
    pub ff_out: Linear,
    pub norm_ff: LayerNorm,
}

impl EncoderLayer {
    pub fn new(store: &mut ParamStore, prefix: &str, dim: usize, heads: usize, rng: &mut Rng) -> Self {
        EncoderLayer {
            attention: MultiHeadAttention::new(store, &name(prefix, "attn"), dim, heads, rng),
            norm_attention: LayerNorm::new(store, &name(prefix, "ln_attn"), dim),
            ff_in: Linear::new(store, &name(prefix, "ff_in"), dim, FF_MULTIPLIER * dim, rng),
            ff_out: Linear::new(store, &name(prefix, "ff_out"), FF_MULTIPLIER * dim, dim, rng),
            norm_ff: LayerNorm::new(store, &name(prefix, "ln_ff"), dim),
        }
    }

    pub fn forward(&self, tape: &mut Tape<'_>, x: Var, keep: Option<&[bool]>, dropout: f64, mode: &mut Mode) -> Result<Var> {
        let a = self.attention.forward(tape, x, keep)?;
        let a = mode.dropout(tape, a, dropout)?;
        let x = tape.add(x, a)?;
        let x = self.norm_attention.forward(tape, x)?;
        let f = self.ff_in.forward(tape, x)?;
        let f = tape.relu(f);
        let f = self.ff_out.forward(tape, f)?;
        let f = mode.dropout(tape, f, dropout)?;
        let x = tape.add(x, f)?;
        self.norm_ff.forward(tape, x)
    }
}

/// Stack of encoder layers. With zero layers it is the exact identity.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub dim: usize,
    pub heads: usize,
    pub dropout: f64,
    pub layers: Vec<EncoderLayer>,
}

impl Encoder {
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        dim: usize,
        heads: usize,
        layers: usize,
        dropout: f64,
        rng: &mut Rng,
    ) -> Self {
        let layers = (0..layers)
            .map(|i| EncoderLayer::new(store, &name(prefix, &alloc::format!("layer{i}")), dim, heads, rng))
            .collect();
        Encoder {
            dim,
            heads,
            dropout,
            layers,
        }
    }

    pub fn forward(&self, tape: &mut Tape<'_>, x: Var, keep: Option<&[bool]>, mode: &mut Mode) -> Result<Var> {
        let shape = tape.shape(x);
        if shape.len() != 2 || shape[1] != self.dim {
            return Err(Error::dim("encoder_block", shape, &[self.dim]));
        }
        let mut h = x;
        for layer in &self.layers {
            h = layer.forward(tape, h, keep, self.dropout, mode)?;
        }
        Ok(h)
    }
}
