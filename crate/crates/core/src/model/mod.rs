//! The joint model: NER head, Encoder-LSTM entity-pair head and relation
//! head over one shared graph, with the summed loss and triple decoding.

mod config;
mod decode;

use alloc::vec;
use alloc::vec::Vec;

pub use config::{Ablation, Dropout, ModelConfig, RcMode};
pub use decode::{decode_triples, ModelOutput};

use crate::autodiff::{Gradients, Tape, Var};
use crate::corpus::EncodedSample;
use crate::encoder_lstm::EncoderLstm;
use crate::error::{Error, Result};
use crate::nn::{AttentionPool, Embedding, Encoder, LayerNorm, Linear, Lstm, Mode};
use crate::params::ParamStore;
use crate::rng::{stream, Stream};

/// Parameter handles of every block.
#[derive(Debug, Clone)]
pub struct Layout {
    pub embed: Embedding,
    pub positions: Embedding,
    pub context: Encoder,
    pub ner_decoder: Option<Lstm>,
    pub ner_out: Linear,
    pub connect: LayerNorm,
    pub encoder_lstm: EncoderLstm,
    pub epe_decoder: Option<Lstm>,
    pub epe_out: Linear,
    pub rc_norm: Option<LayerNorm>,
    pub rc_encoder: Encoder,
    pub rc_pool: AttentionPool,
    pub rc_out: Linear,
}

#[derive(Debug, Clone)]
pub struct JointModel {
    pub config: ModelConfig,
    pub store: ParamStore,
    pub layout: Layout,
}

/// Graph handles of one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    /// Real token count.
    pub len: usize,
    /// Rows actually computed: `len` when trimming, else `max_len`.
    pub rows: usize,
    /// Attention mask over `rows`, if any row is padding.
    pub keep: Option<Vec<bool>>,
    /// Word vectors `[rows, d]`.
    pub s: Var,
    /// NER probabilities `[rows, n_t]`.
    pub n: Var,
    /// `LayerNorm([S; N])`, `[rows, d + n_t]`.
    pub z: Var,
    /// Pair encodings, one `[rows, d_w]` per slot.
    pub h: Vec<Var>,
    /// Role probabilities, one `[rows, n_d]` per slot.
    pub m: Vec<Var>,
    /// Relation probabilities `[n, n_r]`.
    pub p: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct Losses {
    pub ner: Var,
    pub epe: Var,
    pub rc: Var,
    pub all: Var,
}

/// Loss values of one sample.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossValues {
    pub ner: f64,
    pub epe: f64,
    pub rc: f64,
    pub all: f64,
}

impl LossValues {
    pub fn add_scaled(&mut self, other: &LossValues, w: f64) {
        self.ner += w * other.ner;
        self.epe += w * other.epe;
        self.rc += w * other.rc;
        self.all += w * other.all;
    }
}

fn one_hot(ids: &[usize], classes: usize, what: &str) -> Result<Vec<f64>> {
    let mut out = vec![0.0; ids.len() * classes];
    for (row, &id) in ids.iter().enumerate() {
        if id >= classes {
            return Err(Error::contract(alloc::format!("{what} label {id} outside {classes} classes")));
        }
        out[row * classes + id] = 1.0;
    }
    Ok(out)
}

impl JointModel {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let c = &config;
        let mut rng = stream(seed, Stream::Init);
        let mut store = ParamStore::new();
        let s = &mut store;
        let embed = Embedding::new(s, "embed", c.vocab_size, c.embed_dim, &mut rng);
        let positions = Embedding::positions(s, "positions", c.max_len, c.embed_dim, &mut rng);
        let context = Encoder::new(s, "context", c.embed_dim, c.heads, c.context_layers, c.dropout.ner, &mut rng);
        let decoders = !c.ablation.no_lstm_decoder;
        let ner_decoder = decoders.then(|| Lstm::new(s, "ner_decoder", c.embed_dim, c.embed_dim, &mut rng));
        let ner_out = Linear::new(s, "ner_out", c.embed_dim, c.ner_labels, &mut rng);
        let connect = LayerNorm::new(s, "connect", c.z_dim());
        let encoder_lstm = EncoderLstm::new(
            s,
            "encoder_lstm",
            c.z_dim(),
            c.hidden_dim,
            c.heads,
            c.effective_encoder_layers(),
            c.dropout.epe,
            &mut rng,
        );
        let epe_decoder = decoders.then(|| Lstm::new(s, "epe_decoder", c.hidden_dim, c.hidden_dim, &mut rng));
        let epe_out = Linear::new(s, "epe_out", c.hidden_dim, c.sp_labels, &mut rng);
        let rc_in = c.rc_input_dim();
        let rc_norm = (!c.ablation.no_connect_layernorm).then(|| LayerNorm::new(s, "rc_norm", rc_in));
        let rc_encoder = Encoder::new(s, "rc_encoder", rc_in, c.heads, c.rc_encoder_layers, c.dropout.rc, &mut rng);
        let rc_pool = AttentionPool::new(s, "rc_pool", rc_in, c.rc_pooled_dim(), &mut rng);
        let rc_out = Linear::new(s, "rc_out", c.rc_pooled_dim(), c.relation_labels, &mut rng);
        let layout = Layout {
            embed,
            positions,
            context,
            ner_decoder,
            ner_out,
            connect,
            encoder_lstm,
            epe_decoder,
            epe_out,
            rc_norm,
            rc_encoder,
            rc_pool,
            rc_out,
        };
        Ok(JointModel { config, store, layout })
    }

    pub fn tape(&self) -> Tape<'_> {
        Tape::with_params(&self.store)
    }

    /// Word vectors `S` and NER probabilities `N` for `ids` (one row per
    /// id).
    pub fn ner_forward(&self, tape: &mut Tape<'_>, ids: &[usize], keep: Option<&[bool]>, mode: &mut Mode) -> Result<(Var, Var)> {
        let l = &self.layout;
        let positions: Vec<usize> = (0..ids.len()).collect();
        let e = l.embed.forward(tape, ids)?;
        let p = l.positions.forward(tape, &positions)?;
        let x = tape.add(e, p)?;
        let x = mode.dropout(tape, x, self.config.dropout.ner)?;
        let s = l.context.forward(tape, x, keep, mode)?;
        let dec = match &l.ner_decoder {
            Some(lstm) => lstm.forward(tape, s, None, None)?,
            None => s,
        };
        let logits = l.ner_out.forward(tape, dec)?;
        let n = tape.softmax(logits)?;
        Ok((s, n))
    }

    /// `Z = LayerNorm([S; N])`.
    pub fn connect_layernorm(&self, tape: &mut Tape<'_>, s: Var, n: Var) -> Result<Var> {
        let cat = tape.concat(&[s, n], 1)?;
        self.layout.connect.forward(tape, cat)
    }

    /// Pair encodings `H_1..H_n` and role probabilities `M_1..M_n`.
    pub fn epe_forward(&self, tape: &mut Tape<'_>, z: Var, keep: Option<&[bool]>, mode: &mut Mode) -> Result<(Vec<Var>, Vec<Var>)> {
        let l = &self.layout;
        let h = l.encoder_lstm.unroll(tape, z, self.config.slots, keep, mode)?;
        let mut m = Vec::with_capacity(h.len());
        for &ht in &h {
            let dec = match &l.epe_decoder {
                Some(lstm) => lstm.forward(tape, ht, None, None)?,
                None => ht,
            };
            let logits = l.epe_out.forward(tape, dec)?;
            m.push(tape.softmax(logits)?);
        }
        Ok((h, m))
    }

    /// Relation probabilities `[n, n_r]`. Slot `t` reads only `M_t` and
    /// `H_t` among the per-slot inputs; the relation encoder is shared.
    #[allow(clippy::too_many_arguments)]
    pub fn rc_forward(
        &self,
        tape: &mut Tape<'_>,
        m: &[Var],
        h: &[Var],
        n: Var,
        s: Var,
        keep: Option<&[bool]>,
        mode: &mut Mode,
    ) -> Result<Var> {
        if m.len() != h.len() || m.is_empty() {
            return Err(Error::contract("rc_forward needs one M and one H per slot"));
        }
        let l = &self.layout;
        let mut logits = Vec::with_capacity(m.len());
        for (&mt, &ht) in m.iter().zip(h) {
            let x = match &l.rc_norm {
                Some(norm) => {
                    let cat = tape.concat(&[mt, ht, n, s], 1)?;
                    norm.forward(tape, cat)?
                }
                None => tape.concat(&[mt, ht], 1)?,
            };
            let enc = l.rc_encoder.forward(tape, x, keep, mode)?;
            let r = l.rc_pool.forward(tape, enc, keep)?;
            logits.push(l.rc_out.forward(tape, r)?);
        }
        let logits = tape.concat(&logits, 0)?;
        match self.config.rc_mode {
            RcMode::SoftmaxMulticlass => tape.softmax(logits),
            RcMode::SigmoidMultilabel => Ok(tape.sigmoid(logits)),
        }
    }

    /// Full forward pass over `token_ids` (length `max_len`, padding after
    /// the first `len` ids).
    pub fn forward(&self, tape: &mut Tape<'_>, token_ids: &[usize], len: usize, mode: &mut Mode) -> Result<Forward> {
        let c = &self.config;
        if token_ids.len() != c.max_len {
            return Err(Error::dim("forward token ids", &[token_ids.len()], &[c.max_len]));
        }
        if len == 0 || len > c.max_len {
            return Err(Error::contract(alloc::format!("sentence length {len} outside 1..={}", c.max_len)));
        }
        let (ids, keep) = if c.trim_padding || len == c.max_len {
            (&token_ids[..len], None)
        } else {
            (token_ids, Some((0..c.max_len).map(|i| i < len).collect::<Vec<_>>()))
        };
        let k = keep.as_deref();
        let (s, n) = self.ner_forward(tape, ids, k, mode)?;
        let z = self.connect_layernorm(tape, s, n)?;
        let (h, m) = self.epe_forward(tape, z, k, mode)?;
        let p = self.rc_forward(tape, &m, &h, n, s, k, mode)?;
        Ok(Forward {
            len,
            rows: ids.len(),
            keep,
            s,
            n,
            z,
            h,
            m,
            p,
        })
    }

    /// `L_all = L_ner + L_epe + L_rc`, each a cross-entropy summed over
    /// real tokens (or slots) of the sample.
    pub fn joint_loss(&self, tape: &mut Tape<'_>, fwd: &Forward, gold: &EncodedSample) -> Result<Losses> {
        let c = &self.config;
        if gold.max_len() != c.max_len || gold.slots() != c.slots || gold.len != fwd.len {
            return Err(Error::contract(alloc::format!(
                "gold sample (l={}, n={}, len={}) does not fit the model (l={}, n={}, len={})",
                gold.max_len(),
                gold.slots(),
                gold.len,
                c.max_len,
                c.slots,
                fwd.len
            )));
        }
        let rows = fwd.rows;
        let weights: Option<Vec<f64>> = fwd
            .keep
            .as_ref()
            .map(|k| k.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect());
        let w = weights.as_deref();

        let ner = tape.cross_entropy(fwd.n, &one_hot(&gold.ner_gold[..rows], c.ner_labels, "NER")?, w)?;

        let mut epe = None;
        for (mt, tags) in fwd.m.iter().zip(&gold.sp_gold) {
            let l = tape.cross_entropy(*mt, &one_hot(&tags[..rows], c.sp_labels, "role")?, w)?;
            epe = Some(match epe {
                Some(acc) => tape.add(acc, l)?,
                None => l,
            });
        }
        let epe = epe.expect("at least one slot");

        let rc = match c.rc_mode {
            RcMode::SoftmaxMulticlass => {
                let first: Vec<usize> = gold
                    .rel_gold
                    .iter()
                    .map(|r| r.first().copied().ok_or_else(|| Error::contract("slot without relation label")))
                    .collect::<Result<_>>()?;
                tape.cross_entropy(fwd.p, &one_hot(&first, c.relation_labels, "relation")?, None)?
            }
            RcMode::SigmoidMultilabel => {
                let mut target = vec![0.0; c.slots * c.relation_labels];
                for (t, rels) in gold.rel_gold.iter().enumerate() {
                    for &r in rels {
                        if r >= c.relation_labels {
                            return Err(Error::contract(alloc::format!("relation label {r} out of range")));
                        }
                        target[t * c.relation_labels + r] = 1.0;
                    }
                }
                tape.binary_cross_entropy(fwd.p, &target, None)?
            }
        };
        let all = tape.add(ner, epe)?;
        let all = tape.add(all, rc)?;
        Ok(Losses { ner, epe, rc, all })
    }

    /// Loss values and parameter gradients of `scale · L_all` for one
    /// sample.
    pub fn loss_and_gradients(&self, sample: &EncodedSample, mode: &mut Mode, scale: f64) -> Result<(LossValues, Gradients)> {
        let mut tape = self.tape();
        let fwd = self.forward(&mut tape, &sample.token_ids, sample.len, mode)?;
        let losses = self.joint_loss(&mut tape, &fwd, sample)?;
        let values = LossValues {
            ner: tape.scalar(losses.ner),
            epe: tape.scalar(losses.epe),
            rc: tape.scalar(losses.rc),
            all: tape.scalar(losses.all),
        };
        let scaled = tape.scale(losses.all, scale);
        let grads = tape.backward(scaled)?;
        Ok((values, grads))
    }

    /// Loss values without gradients, in inference mode.
    pub fn loss(&self, sample: &EncodedSample) -> Result<LossValues> {
        let mut tape = self.tape();
        let fwd = self.forward(&mut tape, &sample.token_ids, sample.len, &mut Mode::inference())?;
        let l = self.joint_loss(&mut tape, &fwd, sample)?;
        Ok(LossValues {
            ner: tape.scalar(l.ner),
            epe: tape.scalar(l.epe),
            rc: tape.scalar(l.rc),
            all: tape.scalar(l.all),
        })
    }

    /// Inference-mode outputs for one padded sentence.
    pub fn predict(&self, token_ids: &[usize], len: usize) -> Result<ModelOutput> {
        let mut tape = self.tape();
        let fwd = self.forward(&mut tape, token_ids, len, &mut Mode::inference())?;
        ModelOutput::from_forward(&tape, &fwd, self.config.rc_mode)
    }
}
