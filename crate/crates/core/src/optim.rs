//! First-order optimizers over a [`ParamStore`].

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Decay, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    /// Decoupled (AdamW-style) decay; applied according to each parameter's [`Decay`].
    pub weight_decay: f64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
    step_count: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64, params: &ParamStore) -> Result<Self> {
        if !(learning_rate > 0.0) {
            return Err(Error::contract("learning rate must be positive"));
        }
        let moments = |store: &ParamStore| match kind {
            OptimizerKind::Adam => store.iter().map(|(_, p)| vec![0.0; p.tensor.len()]).collect(),
            OptimizerKind::Sgd => Vec::new(),
        };
        Ok(OptimizerState {
            kind,
            learning_rate,
            weight_decay: 0.0,
            first_moment: moments(params),
            second_moment: moments(params),
            step_count: 0,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One update using the gradients currently stored on each parameter.
    /// Gradients are left in place; the caller zeroes them.
    pub fn step(&mut self, params: &mut ParamStore) -> Result<()> {
        if let Some((_, p)) = params.iter().find(|(_, p)| p.tensor.grad.is_none()) {
            return Err(Error::contract(alloc::format!(
                "parameter `{}` has no gradient",
                p.name
            )));
        }
        if self.kind == OptimizerKind::Adam && self.first_moment.len() != params.len() {
            return Err(Error::contract("optimizer state built for a different parameter set"));
        }
        self.step_count += 1;
        let t = self.step_count as f64;
        let lr = self.learning_rate;
        let bc1 = 1.0 - libm::pow(ADAM_BETA1, t);
        let bc2 = 1.0 - libm::pow(ADAM_BETA2, t);
        let ids: Vec<_> = params.ids().collect();
        for id in ids {
            let param = params.get_mut(id);
            let decay = param.decay;
            let width = *param.tensor.shape().last().unwrap_or(&1);
            let grad = param.tensor.grad.take().expect("checked above");
            {
                let data = param.tensor.data_mut();
                match self.kind {
                    OptimizerKind::Sgd => {
                        for (w, g) in data.iter_mut().zip(&grad) {
                            *w -= lr * g;
                        }
                    }
                    OptimizerKind::Adam => {
                        let m = &mut self.first_moment[id.index()];
                        let v = &mut self.second_moment[id.index()];
                        for i in 0..data.len() {
                            let g = grad[i];
                            m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
                            v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
                            let m_hat = m[i] / bc1;
                            let v_hat = v[i] / bc2;
                            data[i] -= lr * m_hat / (libm::sqrt(v_hat) + ADAM_EPS);
                        }
                    }
                }
                if self.weight_decay > 0.0 {
                    let skip = match decay {
                        Decay::None => data.len(),
                        Decay::All => 0,
                        Decay::SkipFirstRow => width,
                    };
                    let factor = 1.0 - lr * self.weight_decay;
                    if skip < data.len() {
                        for w in &mut data[skip..] {
                            *w *= factor;
                        }
                    }
                }
            }
            param.tensor.grad = Some(grad);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn store_with(w: f64, g: f64) -> (ParamStore, crate::ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::vector(&[w]), Decay::All);
        s.get_mut(id).tensor.grad = Some(vec![g]);
        (s, id)
    }

    #[test]
    fn sgd_single_step() {
        let (mut s, id) = store_with(1.0, 1.0);
        let mut opt = OptimizerState::new(OptimizerKind::Sgd, 0.1, &s).unwrap();
        opt.step(&mut s).unwrap();
        assert!((s.tensor(id).data()[0] - 0.9).abs() < 1e-15);
        assert_eq!(opt.step_count(), 1);
        // grads untouched
        assert_eq!(s.tensor(id).grad.as_deref(), Some(&[1.0][..]));
    }

    #[test]
    fn sgd_zero_grad_is_fixed_point() {
        let (mut s, id) = store_with(0.7, 0.0);
        let mut opt = OptimizerState::new(OptimizerKind::Sgd, 0.5, &s).unwrap();
        opt.step(&mut s).unwrap();
        assert_eq!(s.tensor(id).data()[0], 0.7);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        // m̂ = g, v̂ = g², so the step is lr·g/(|g|+eps) ≈ lr·sign(g).
        for g in [1e-3, 0.5, -7.0, 300.0] {
            let (mut s, id) = store_with(0.0, g);
            let mut opt = OptimizerState::new(OptimizerKind::Adam, 0.01, &s).unwrap();
            opt.step(&mut s).unwrap();
            let moved = s.tensor(id).data()[0];
            let expected = -0.01 * g / (g.abs() + ADAM_EPS);
            assert!((moved - expected).abs() < 1e-15, "g={g}");
            assert!((moved.abs() - 0.01).abs() < 1e-6);
        }
    }

    #[test]
    fn missing_gradient_is_an_error() {
        let (mut s, id) = store_with(1.0, 1.0);
        s.get_mut(id).tensor.grad = None;
        let mut opt = OptimizerState::new(OptimizerKind::Sgd, 0.1, &s).unwrap();
        assert!(matches!(opt.step(&mut s), Err(Error::Contract(_))));
    }

    #[test]
    fn weight_decay_skips_pad_row() {
        let mut s = ParamStore::new();
        let id = s.add(
            "emb",
            Tensor::new(&[2, 2], vec![1.0, 1.0, 1.0, 1.0]).unwrap(),
            Decay::SkipFirstRow,
        );
        let mut opt = OptimizerState::new(OptimizerKind::Sgd, 0.1, &s).unwrap();
        opt.weight_decay = 0.5;
        opt.step(&mut s).unwrap();
        assert_eq!(s.tensor(id).data(), &[1.0, 1.0, 0.95, 0.95]);
    }
}
