use alloc::vec::Vec;

use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::params::{Decay, ParamId, ParamStore};
use crate::rng::Rng;
use crate::tensor::Tensor;

use super::{name, LN_EPS};

/// `x · W + b` with `W: [in, out]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, prefix: &str, input_dim: usize, output_dim: usize, rng: &mut Rng) -> Self {
        let weight = store.add_xavier(name(prefix, "weight"), input_dim, output_dim, rng);
        let bias = store.add_constant(name(prefix, "bias"), &[output_dim], 0.0);
        Linear {
            weight,
            bias,
            input_dim,
            output_dim,
        }
    }

    pub fn forward(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        let w = tape.param(self.weight);
        let b = tape.param(self.bias);
        let y = tape.matmul(x, w)?;
        tape.add_bias(y, b)
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, prefix: &str, dim: usize) -> Self {
        LayerNorm {
            gain: store.add_constant(name(prefix, "gain"), &[dim], 1.0),
            bias: store.add_constant(name(prefix, "bias"), &[dim], 0.0),
        }
    }

    pub fn forward(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        let g = tape.param(self.gain);
        let b = tape.param(self.bias);
        tape.layer_norm(x, g, b, LN_EPS)
    }
}

/// Token embedding table; row 0 is the PAD embedding and is never decayed.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub table: ParamId,
    pub vocab_size: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new(store: &mut ParamStore, prefix: &str, vocab_size: usize, dim: usize, rng: &mut Rng) -> Self {
        let id = store.add_xavier(name(prefix, "table"), vocab_size, dim, rng);
        store.get_mut(id).decay = Decay::SkipFirstRow;
        Embedding {
            table: id,
            vocab_size,
            dim,
        }
    }

    /// Learned position table: same layout, every row decayed.
    pub fn positions(store: &mut ParamStore, prefix: &str, max_len: usize, dim: usize, rng: &mut Rng) -> Self {
        let data: Vec<f64> = {
            use rand::Rng as _;
            let bound = libm::sqrt(6.0 / (max_len + dim) as f64);
            (0..max_len * dim).map(|_| rng.gen_range(-bound..bound)).collect()
        };
        let id = store.add(
            name(prefix, "table"),
            Tensor::new(&[max_len, dim], data).expect("positive dims"),
            Decay::All,
        );
        Embedding {
            table: id,
            vocab_size: max_len,
            dim,
        }
    }

    pub fn forward(&self, tape: &mut Tape<'_>, ids: &[usize]) -> Result<Var> {
        let t = tape.param(self.table);
        tape.gather_rows(t, ids)
    }
}
