//! Gradient checks of every block at small shapes, plus the full joint loss.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::autodiff::{Tape, Var};
use crate::corpus::EncodedSample;
use crate::encoder_lstm::{EncoderLstm, EncoderLstmState};
use crate::error::{Error, Result};
use crate::gradcheck::{grad_check_params, ParamCheckOptions};
use crate::model::{Dropout, JointModel, ModelConfig};
use crate::nn::{lstm_cell, AttentionPool, Encoder, LayerNorm, Lstm, Mode, MultiHeadAttention};
use crate::params::{ParamId, ParamStore};
use crate::rng::{stream, Rng, Stream};
use crate::tensor::Tensor;

/// Maximum accepted relative error.
pub const TOLERANCE: f64 = 1e-4;

/// Every block the suite checks, in report order.
pub const BLOCKS: [&str; 12] = [
    "layer_norm",
    "lstm_cell",
    "lstm_layer",
    "multi_head_attention",
    "encoder_block",
    "attention_pool",
    "encoder_lstm_step",
    "encoder_lstm_unroll",
    "ner_head",
    "epe_head",
    "rc_head",
    "joint_loss",
];

#[derive(Debug, Clone, PartialEq)]
pub struct BlockCheck {
    pub block: String,
    pub params_checked: usize,
    pub coords_checked: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Coordinates sampled per parameter tensor; `None` checks all.
    pub max_coords: Option<usize>,
    /// Test hook: add a wrong term to the first parameter gradient of this
    /// block.
    pub corrupt: Option<String>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            seed: 0,
            max_coords: Some(6),
            corrupt: None,
        }
    }
}

fn random(rng: &mut Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("positive shape")
}

/// `Σ y ⊙ r` for a fixed random `r`, so every output entry matters.
fn readout(tape: &mut Tape<'_>, y: Var, r: &Tensor) -> Result<Var> {
    let rv = tape.input(r);
    let prod = tape.mul(y, rv)?;
    Ok(tape.sum(prod))
}

struct Runner<'o> {
    opts: &'o SuiteOptions,
    rng: Rng,
    out: Vec<BlockCheck>,
}

impl Runner<'_> {
    fn run<F>(&mut self, block: &str, store: &mut ParamStore, f: F) -> Result<()>
    where
        F: Fn(&mut Tape<'_>) -> Result<Var>,
    {
        let ids: Vec<ParamId> = store.ids().collect();
        let corrupt = (self.opts.corrupt.as_deref() == Some(block)).then(|| (ids[0], 1.0));
        let popts = ParamCheckOptions {
            max_coords: self.opts.max_coords,
            corrupt,
            ..ParamCheckOptions::default()
        };
        let checks = grad_check_params(store, &ids, &popts, &mut self.rng, f)?;
        let worst = checks.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
        self.out.push(BlockCheck {
            block: block.into(),
            params_checked: checks.len(),
            coords_checked: checks.iter().map(|c| c.coords_checked).sum(),
            max_rel_error: worst,
            passed: worst <= TOLERANCE,
        });
        Ok(())
    }
}

/// The small joint-model configuration used by the head checks.
pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        max_len: 8,
        embed_dim: 8,
        hidden_dim: 8,
        slots: 2,
        ner_labels: 5,
        relation_labels: 3,
        vocab_size: 12,
        heads: 2,
        encoder_layers: 1,
        rc_encoder_layers: 1,
        context_layers: 1,
        dropout: Dropout::uniform(0.0),
        trim_padding: false,
        ..ModelConfig::desk()
    }
}

/// A random gold sample for `config` with `len` real tokens.
pub fn random_sample(config: &ModelConfig, len: usize, rng: &mut Rng) -> EncodedSample {
    let l = config.max_len;
    let real = |rng: &mut Rng, classes: usize| -> Vec<usize> {
        (0..l).map(|i| if i < len { rng.gen_range(0..classes) } else { 0 }).collect()
    };
    EncodedSample {
        token_ids: (0..l).map(|i| if i < len { rng.gen_range(2..config.vocab_size) } else { 0 }).collect(),
        len,
        ner_gold: real(rng, config.ner_labels),
        sp_gold: (0..config.slots).map(|_| real(rng, config.sp_labels)).collect(),
        rel_gold: (0..config.slots)
            .map(|_| alloc::vec![rng.gen_range(0..config.relation_labels)])
            .collect(),
    }
}

/// Runs every check in [`BLOCKS`] order.
pub fn gradient_suite(opts: &SuiteOptions) -> Result<Vec<BlockCheck>> {
    if let Some(name) = &opts.corrupt {
        if !BLOCKS.contains(&name.as_str()) {
            return Err(Error::contract(alloc::format!("unknown block `{name}`")));
        }
    }
    let mut init = stream(opts.seed, Stream::Init);
    let mut data = stream(opts.seed, Stream::Synthetic);
    let mut r = Runner {
        opts,
        rng: stream(opts.seed, Stream::GradCheck),
        out: Vec::with_capacity(BLOCKS.len()),
    };
    let mode = || Mode::inference();

    {
        let mut store = ParamStore::new();
        let ln = LayerNorm::new(&mut store, "ln", 6);
        // move gain/bias off their initial values so both matter
        for id in store.ids().collect::<Vec<_>>() {
            for v in store.get_mut(id).tensor.data_mut() {
                *v += data.gen_range(-0.5..0.5);
            }
        }
        let (x, ro) = (random(&mut data, &[4, 6]), random(&mut data, &[4, 6]));
        r.run("layer_norm", &mut store, |t| {
            let xv = t.input(&x);
            let y = ln.forward(t, xv)?;
            readout(t, y, &ro)
        })?;
    }
    {
        let mut store = ParamStore::new();
        let lstm = Lstm::new(&mut store, "cell", 5, 4, &mut init);
        let (x, h, c, ro) = (
            random(&mut data, &[3, 5]),
            random(&mut data, &[3, 4]),
            random(&mut data, &[3, 4]),
            random(&mut data, &[3, 4]),
        );
        r.run("lstm_cell", &mut store, |t| {
            let (xv, hv, cv) = (t.input(&x), t.input(&h), t.input(&c));
            let (hn, cn) = lstm_cell(t, &lstm, xv, hv, cv)?;
            let s = t.add(hn, cn)?;
            readout(t, s, &ro)
        })?;
    }
    {
        let mut store = ParamStore::new();
        let lstm = Lstm::new(&mut store, "layer", 5, 4, &mut init);
        let (x, ro) = (random(&mut data, &[6, 5]), random(&mut data, &[6, 4]));
        r.run("lstm_layer", &mut store, |t| {
            let xv = t.input(&x);
            let y = lstm.forward(t, xv, None, None)?;
            readout(t, y, &ro)
        })?;
    }
    {
        let mut store = ParamStore::new();
        let mha = MultiHeadAttention::new(&mut store, "mha", 8, 2, &mut init);
        let (x, ro) = (random(&mut data, &[5, 8]), random(&mut data, &[5, 8]));
        let keep = [true, true, true, true, false];
        r.run("multi_head_attention", &mut store, |t| {
            let xv = t.input(&x);
            let y = mha.forward(t, xv, Some(&keep))?;
            readout(t, y, &ro)
        })?;
    }
    {
        let mut store = ParamStore::new();
        let enc = Encoder::new(&mut store, "enc", 8, 2, 1, 0.0, &mut init);
        let (x, ro) = (random(&mut data, &[5, 8]), random(&mut data, &[5, 8]));
        r.run("encoder_block", &mut store, |t| {
            let xv = t.input(&x);
            let y = enc.forward(t, xv, None, &mut mode())?;
            readout(t, y, &ro)
        })?;
    }
    {
        let mut store = ParamStore::new();
        let pool = AttentionPool::new(&mut store, "pool", 8, 6, &mut init);
        let (x, ro) = (random(&mut data, &[5, 8]), random(&mut data, &[1, 6]));
        r.run("attention_pool", &mut store, |t| {
            let xv = t.input(&x);
            let y = pool.forward(t, xv, None)?;
            readout(t, y, &ro)
        })?;
    }
    {
        let mut store = ParamStore::new();
        let cell = EncoderLstm::new(&mut store, "elstm", 5, 6, 2, 1, 0.0, &mut init);
        let (z, h0, c0, ro) = (
            random(&mut data, &[4, 5]),
            random(&mut data, &[4, 6]),
            random(&mut data, &[4, 6]),
            random(&mut data, &[4, 6]),
        );
        r.run("encoder_lstm_step", &mut store, |t| {
            let zv = t.input(&z);
            let state = EncoderLstmState {
                h: t.input(&h0),
                c: t.input(&c0),
            };
            let next = cell.step(t, zv, state, None, &mut mode())?;
            readout(t, next.h, &ro)
        })?;
        r.run("encoder_lstm_unroll", &mut store, |t| {
            let zv = t.input(&z);
            let hs = cell.unroll(t, zv, 3, None, &mut mode())?;
            let all = t.concat(&hs, 1)?;
            let wide = Tensor::new(&[4, 18], ro.data().repeat(3)).expect("shape");
            readout(t, all, &wide)
        })?;
    }
    {
        let config = tiny_config();
        let mut model = JointModel::new(config.clone(), opts.seed)?;
        let sample = random_sample(&config, 6, &mut data);
        let mut store = core::mem::take(&mut model.store);
        let heads: [(&str, fn(&crate::model::Losses) -> Var); 4] = [
            ("ner_head", |l| l.ner),
            ("epe_head", |l| l.epe),
            ("rc_head", |l| l.rc),
            ("joint_loss", |l| l.all),
        ];
        for (block, pick) in heads {
            r.run(block, &mut store, |t| {
                let fwd = model.forward(t, &sample.token_ids, sample.len, &mut mode())?;
                let losses = model.joint_loss(t, &fwd, &sample)?;
                Ok(pick(&losses))
            })?;
        }
        model.store = store;
    }
    Ok(r.out)
}
