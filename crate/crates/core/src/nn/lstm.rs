use alloc::vec::Vec;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};
use crate::rng::Rng;

use super::name;

/// Standard LSTM. Each gate has a weight of shape `(input + hidden, hidden)`
/// acting on `[x_t; h_{t-1}]`, and a bias; the forget bias starts at 1.
#[derive(Debug, Clone)]
pub struct Lstm {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// Gate order: input, forget, output, candidate.
    pub weights: [ParamId; 4],
    pub biases: [ParamId; 4],
}

impl Lstm {
    pub fn new(store: &mut ParamStore, prefix: &str, input_dim: usize, hidden_dim: usize, rng: &mut Rng) -> Self {
        let gates = ["i", "f", "o", "c"];
        let weights = gates.map(|g| {
            store.add_xavier(name(prefix, &alloc::format!("w_{g}")), input_dim + hidden_dim, hidden_dim, rng)
        });
        let biases = gates.map(|g| {
            let init = if g == "f" { 1.0 } else { 0.0 };
            store.add_constant(name(prefix, &alloc::format!("b_{g}")), &[hidden_dim], init)
        });
        Lstm {
            input_dim,
            hidden_dim,
            weights,
            biases,
        }
    }

    /// Runs left to right over the rows of `x: [l, input]` and returns
    /// `[l, hidden]`. Missing initial states are zeros.
    pub fn forward(&self, tape: &mut Tape<'_>, x: Var, h0: Option<Var>, c0: Option<Var>) -> Result<Var> {
        let shape = tape.shape(x).to_vec();
        if shape.len() != 2 || shape[1] != self.input_dim {
            return Err(Error::dim("lstm_layer", &shape, &[self.input_dim]));
        }
        let (len, hid) = (shape[0], self.hidden_dim);
        // Split every gate weight into its input and recurrent rows and run
        // the input projection for all steps at once.
        let mut wx = Vec::with_capacity(4);
        let mut wh = Vec::with_capacity(4);
        let mut bs = Vec::with_capacity(4);
        for g in 0..4 {
            let w = tape.param(self.weights[g]);
            wx.push(tape.slice(w, 0, 0, self.input_dim)?);
            wh.push(tape.slice(w, 0, self.input_dim, hid)?);
            bs.push(tape.param(self.biases[g]));
        }
        let wx = tape.concat(&wx, 1)?;
        let wh = tape.concat(&wh, 1)?;
        let bias = tape.concat(&bs, 0)?;
        let xw = tape.matmul(x, wx)?;
        let xw = tape.add_bias(xw, bias)?;

        let mut h = h0;
        let mut c = c0;
        let mut outputs = Vec::with_capacity(len);
        for t in 0..len {
            let mut pre = tape.slice(xw, 0, t, 1)?;
            if let Some(hp) = h {
                let rec = tape.matmul(hp, wh)?;
                pre = tape.add(pre, rec)?;
            }
            let (hn, cn) = gate_update(tape, pre, c, hid)?;
            outputs.push(hn);
            h = Some(hn);
            c = Some(cn);
        }
        tape.concat(&outputs, 0)
    }
}

/// Applies the LSTM state update to stacked pre-activations
/// `[i | f | o | c̃]` of width `4·hidden`.
fn gate_update(tape: &mut Tape<'_>, pre: Var, c_prev: Option<Var>, hid: usize) -> Result<(Var, Var)> {
    let i = tape.slice(pre, 1, 0, hid)?;
    let f = tape.slice(pre, 1, hid, hid)?;
    let o = tape.slice(pre, 1, 2 * hid, hid)?;
    let g = tape.slice(pre, 1, 3 * hid, hid)?;
    let i = tape.sigmoid(i);
    let o = tape.sigmoid(o);
    let g = tape.tanh(g);
    let mut c = tape.mul(i, g)?;
    if let Some(cp) = c_prev {
        let f = tape.sigmoid(f);
        let keep = tape.mul(cp, f)?;
        c = tape.add(c, keep)?;
    }
    let tc = tape.tanh(c);
    let h = tape.mul(o, tc)?;
    Ok((h, c))
}

/// One LSTM step on a batch of rows: `x: [r, input]`, `h, c: [r, hidden]`.
/// Returns `(h_next, c_next)`.
pub fn lstm_cell(tape: &mut Tape<'_>, params: &Lstm, x: Var, h: Var, c: Var) -> Result<(Var, Var)> {
    let xh = tape.concat(&[x, h], 1)?;
    let mut pre = Vec::with_capacity(4);
    for g in 0..4 {
        let w = tape.param(params.weights[g]);
        let b = tape.param(params.biases[g]);
        let z = tape.matmul(xh, w)?;
        pre.push(tape.add_bias(z, b)?);
    }
    let pre = tape.concat(&pre, 1)?;
    gate_update(tape, pre, Some(c), params.hidden_dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{grad_check_params, ParamCheckOptions};
    use crate::rng::{stream, Stream};
    use crate::tensor::Tensor;
    use rand::Rng as _;

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    /// Plain-loop reference cell, independent of the tape.
    fn reference_step(store: &ParamStore, p: &Lstm, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let xh: Vec<f64> = x.iter().chain(h).copied().collect();
        let hid = p.hidden_dim;
        let gate = |g: usize| -> Vec<f64> {
            let w = store.tensor(p.weights[g]).data();
            let b = store.tensor(p.biases[g]).data();
            (0..hid)
                .map(|j| b[j] + xh.iter().enumerate().map(|(k, v)| v * w[k * hid + j]).sum::<f64>())
                .collect()
        };
        let (i, f, o, g) = (gate(0), gate(1), gate(2), gate(3));
        let c_new: Vec<f64> = (0..hid).map(|j| sig(i[j]) * g[j].tanh() + c[j] * sig(f[j])).collect();
        let h_new: Vec<f64> = (0..hid).map(|j| sig(o[j]) * c_new[j].tanh()).collect();
        (h_new, c_new)
    }

    fn random_input(rng: &mut Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn layer_matches_reference_cell() {
        let mut rng = stream(3, Stream::Init);
        let mut store = ParamStore::new();
        let lstm = Lstm::new(&mut store, "lstm", 3, 4, &mut rng);
        // perturb biases off their init values
        for id in lstm.biases {
            for v in store.get_mut(id).tensor.data_mut() {
                *v += rng.gen_range(-0.5..0.5);
            }
        }
        let xs = random_input(&mut rng, 5 * 3);
        let mut t = Tape::with_params(&store);
        let x = t.input(&Tensor::new(&[5, 3], xs.clone()).unwrap());
        let y = lstm.forward(&mut t, x, None, None).unwrap();
        let got = t.value(y).to_vec();

        let (mut h, mut c) = (vec![0.0; 4], vec![0.0; 4]);
        for step in 0..5 {
            let (hn, cn) = reference_step(&store, &lstm, &xs[step * 3..step * 3 + 3], &h, &c);
            for j in 0..4 {
                assert!((got[step * 4 + j] - hn[j]).abs() < 1e-12);
            }
            h = hn;
            c = cn;
        }
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let mut rng = stream(1, Stream::Init);
        let mut store = ParamStore::new();
        let lstm = Lstm::new(&mut store, "lstm", 2, 3, &mut rng);
        for id in lstm.weights.iter().chain(&lstm.biases) {
            store.get_mut(*id).tensor.data_mut().fill(0.0);
        }
        let mut t = Tape::with_params(&store);
        let x = t.input(&Tensor::full(&[4, 2], 0.7));
        let y = lstm.forward(&mut t, x, None, None).unwrap();
        assert!(t.value(y).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn output_is_causal() {
        let mut rng = stream(5, Stream::Init);
        let mut store = ParamStore::new();
        let lstm = Lstm::new(&mut store, "lstm", 2, 3, &mut rng);
        let xs = random_input(&mut rng, 8);
        let run = |data: Vec<f64>| {
            let mut t = Tape::with_params(&store);
            let x = t.input(&Tensor::new(&[4, 2], data).unwrap());
            let y = lstm.forward(&mut t, x, None, None).unwrap();
            t.value(y).to_vec()
        };
        let base = run(xs.clone());
        let mut perturbed = xs;
        perturbed[2 * 2] += 1.0; // row 2
        let other = run(perturbed);
        assert_eq!(&base[..2 * 3], &other[..2 * 3]);
        assert_ne!(&base[2 * 3..], &other[2 * 3..]);
    }

    #[test]
    fn cell_and_layer_gradients_check() {
        let mut rng = stream(9, Stream::Init);
        let mut store = ParamStore::new();
        let lstm = Lstm::new(&mut store, "lstm", 3, 4, &mut rng);
        let xs = Tensor::new(&[5, 3], random_input(&mut rng, 15)).unwrap();
        let ids: Vec<_> = store.ids().collect();
        let opts = ParamCheckOptions::default();
        let checks = grad_check_params(&mut store, &ids, &opts, &mut rng, |t| {
            let x = t.input(&xs);
            let y = lstm.forward(t, x, None, None)?;
            let y = t.tanh(y);
            Ok(t.sum(y))
        })
        .unwrap();
        for c in checks {
            assert!(c.max_rel_error <= 1e-4, "{c:?}");
        }

        let x1 = Tensor::new(&[2, 3], random_input(&mut rng, 6)).unwrap();
        let h1 = Tensor::new(&[2, 4], random_input(&mut rng, 8)).unwrap();
        let c1 = Tensor::new(&[2, 4], random_input(&mut rng, 8)).unwrap();
        let checks = grad_check_params(&mut store, &ids, &opts, &mut rng, |t| {
            let (x, h, c) = (t.input(&x1), t.input(&h1), t.input(&c1));
            let (hn, cn) = lstm_cell(t, &lstm, x, h, c)?;
            let s = t.mul(hn, cn)?;
            Ok(t.sum(s))
        })
        .unwrap();
        for c in checks {
            assert!(c.max_rel_error <= 1e-4, "{c:?}");
        }
    }
}
