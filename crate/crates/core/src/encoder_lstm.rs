//! The Encoder-LSTM cell: an LSTM over a whole sentence whose four gates each
//! read the sentence through their own Transformer encoder.
//!
//! With `X = [Z; H_{t-1}]` (per token):
//!
//! ```text
//! I = σ(Enc_i(X) W_i + b_i)     F = σ(Enc_f(X) W_f + b_f)
//! O = σ(Enc_o(X) W_o + b_o)     C̃ = tanh(Enc_c(X) W_c + b_c)
//! C_t = I ∗ C̃ + C_{t-1} ∗ F     H_t = O ∗ tanh(C_t)
//! ```
//!
//! `Z` stays fixed while the cell is unrolled; only `(H, C)` evolve.

use alloc::vec::Vec;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::nn::{name, Encoder, Linear, Mode};
use crate::params::ParamStore;
use crate::rng::Rng;

/// Gate order used for `encoders` and `projections`.
pub const GATES: [&str; 4] = ["input", "forget", "output", "candidate"];

#[derive(Debug, Clone)]
pub struct EncoderLstm {
    /// Width of `Z`.
    pub input_dim: usize,
    /// `d_w`, width of `H` and `C`.
    pub hidden_dim: usize,
    pub encoders: [Encoder; 4],
    pub projections: [Linear; 4],
}

/// Recurrent state, both `[l, d_w]`.
#[derive(Debug, Clone, Copy)]
pub struct EncoderLstmState {
    pub h: Var,
    pub c: Var,
}

impl EncoderLstmState {
    pub fn zeros(tape: &mut Tape<'_>, len: usize, hidden: usize) -> Result<Self> {
        let h = tape.constant(&[len, hidden], alloc::vec![0.0; len * hidden])?;
        let c = tape.constant(&[len, hidden], alloc::vec![0.0; len * hidden])?;
        Ok(EncoderLstmState { h, c })
    }
}

/// Gate activations of one step, exposed for inspection.
#[derive(Debug, Clone, Copy)]
pub struct GateTrace {
    pub input: Var,
    pub forget: Var,
    pub output: Var,
    pub candidate: Var,
}

impl EncoderLstm {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        heads: usize,
        layers: usize,
        dropout: f64,
        rng: &mut Rng,
    ) -> Self {
        let width = input_dim + hidden_dim;
        let encoders = GATES.map(|g| {
            Encoder::new(store, &name(prefix, &alloc::format!("enc_{g}")), width, heads, layers, dropout, rng)
        });
        let projections =
            GATES.map(|g| Linear::new(store, &name(prefix, &alloc::format!("proj_{g}")), width, hidden_dim, rng));
        EncoderLstm {
            input_dim,
            hidden_dim,
            encoders,
            projections,
        }
    }

    pub fn step(
        &self,
        tape: &mut Tape<'_>,
        z: Var,
        state: EncoderLstmState,
        keep: Option<&[bool]>,
        mode: &mut Mode,
    ) -> Result<EncoderLstmState> {
        Ok(self.step_traced(tape, z, state, keep, mode)?.0)
    }

    pub fn step_traced(
        &self,
        tape: &mut Tape<'_>,
        z: Var,
        state: EncoderLstmState,
        keep: Option<&[bool]>,
        mode: &mut Mode,
    ) -> Result<(EncoderLstmState, GateTrace)> {
        let zs = tape.shape(z).to_vec();
        if zs.len() != 2 || zs[1] != self.input_dim {
            return Err(Error::dim("encoder_lstm_step", &zs, &[self.input_dim]));
        }
        let want = [zs[0], self.hidden_dim];
        for v in [state.h, state.c] {
            if tape.shape(v) != want {
                return Err(Error::dim("encoder_lstm_step state", tape.shape(v), &want));
            }
        }
        let x = tape.concat(&[z, state.h], 1)?;
        let mut pre = [x; 4];
        for g in 0..4 {
            let e = self.encoders[g].forward(tape, x, keep, mode)?;
            pre[g] = self.projections[g].forward(tape, e)?;
        }
        let input = tape.sigmoid(pre[0]);
        let forget = tape.sigmoid(pre[1]);
        let output = tape.sigmoid(pre[2]);
        let candidate = tape.tanh(pre[3]);

        let fresh = tape.mul(input, candidate)?;
        let kept = tape.mul(state.c, forget)?;
        let c = tape.add(fresh, kept)?;
        let tc = tape.tanh(c);
        let h = tape.mul(output, tc)?;
        Ok((
            EncoderLstmState { h, c },
            GateTrace {
                input,
                forget,
                output,
                candidate,
            },
        ))
    }

    /// Runs `n` steps from a zero state and returns `H_1, …, H_n`.
    pub fn unroll(&self, tape: &mut Tape<'_>, z: Var, n: usize, keep: Option<&[bool]>, mode: &mut Mode) -> Result<Vec<Var>> {
        if n == 0 {
            return Err(Error::contract("encoder_lstm_unroll needs at least one step"));
        }
        let len = *tape.shape(z).first().unwrap_or(&0);
        let mut state = EncoderLstmState::zeros(tape, len, self.hidden_dim)?;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            state = self.step(tape, z, state, keep, mode)?;
            out.push(state.h);
        }
        Ok(out)
    }

    /// [`unroll`](Self::unroll) stacked into one `[n, l, d_w]` tensor.
    pub fn unroll_stacked(
        &self,
        tape: &mut Tape<'_>,
        z: Var,
        n: usize,
        keep: Option<&[bool]>,
        mode: &mut Mode,
    ) -> Result<Var> {
        let slots = self.unroll(tape, z, n, keep, mode)?;
        let len = tape.shape(slots[0])[0];
        let flat = tape.concat(&slots, 0)?;
        tape.reshape(flat, &[n, len, self.hidden_dim])
    }
}
