//! Central-difference gradient checking.
//!
//! The relative error of one coordinate is
//! `|analytic - numeric| / max(1, |analytic|, |numeric|)`.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index::sample;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};
use crate::rng::Rng;
use crate::tensor::Tensor;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs())
}

fn check_step(h: f64) -> Result<()> {
    if !(1e-7..=1e-3).contains(&h) {
        return Err(Error::contract(alloc::format!(
            "finite-difference step {h} outside [1e-7, 1e-3]"
        )));
    }
    Ok(())
}

fn scalar_of(tape: &Tape<'_>, y: Var) -> Result<f64> {
    if tape.value(y).len() != 1 {
        return Err(Error::contract(alloc::format!(
            "gradient check needs a scalar function, got shape {:?}",
            tape.shape(y)
        )));
    }
    Ok(tape.scalar(y))
}

/// Max relative error between the tape gradient of `f` at `x` and central
/// differences, over every coordinate of `x`.
pub fn grad_check<F>(x: &Tensor, h: f64, f: F) -> Result<f64>
where
    F: Fn(&mut Tape<'_>, Var) -> Result<Var>,
{
    check_step(h)?;
    let mut tape = Tape::new();
    let xv = tape.input(&x.clone().with_grad());
    let y = f(&mut tape, xv)?;
    scalar_of(&tape, y)?;
    let grads = tape.backward(y)?;
    let analytic: Vec<f64> = grads
        .wrt(xv)
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| alloc::vec![0.0; x.len()]);

    let eval = |point: &Tensor| -> Result<f64> {
        let mut t = Tape::new();
        let v = t.input(point);
        let y = f(&mut t, v)?;
        scalar_of(&t, y)
    };

    let mut worst = 0.0f64;
    let mut probe = x.clone();
    probe.requires_grad = false;
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let fp = eval(&probe)?;
        probe.data_mut()[i] = orig - h;
        let fm = eval(&probe)?;
        probe.data_mut()[i] = orig;
        worst = worst.max(relative_error(analytic[i], (fp - fm) / (2.0 * h)));
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub coords_checked: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct ParamCheckOptions {
    pub step: f64,
    /// Check at most this many randomly chosen coordinates per parameter.
    pub max_coords: Option<usize>,
    /// Test hook forwarded to [`Tape::corrupt_gradient`].
    pub corrupt: Option<(ParamId, f64)>,
}

impl Default for ParamCheckOptions {
    fn default() -> Self {
        ParamCheckOptions {
            step: 1e-6,
            max_coords: None,
            corrupt: None,
        }
    }
}

/// Gradient check of a scalar function of the parameters in `store`.
pub fn grad_check_params<F>(
    store: &mut ParamStore,
    ids: &[ParamId],
    opts: &ParamCheckOptions,
    rng: &mut Rng,
    f: F,
) -> Result<Vec<ParamCheck>>
where
    F: Fn(&mut Tape<'_>) -> Result<Var>,
{
    check_step(opts.step)?;
    let h = opts.step;
    let grads = {
        let mut tape = Tape::with_params(store);
        if let Some((id, d)) = opts.corrupt {
            tape.corrupt_gradient(id, d);
        }
        let y = f(&mut tape)?;
        scalar_of(&tape, y)?;
        tape.backward(y)?
    };

    let eval = |store: &ParamStore| -> Result<f64> {
        let mut t = Tape::with_params(store);
        let y = f(&mut t)?;
        scalar_of(&t, y)
    };

    let mut out = Vec::with_capacity(ids.len());
    for &id in ids {
        let n = store.tensor(id).len();
        let analytic: Vec<f64> = grads
            .param(id)
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| alloc::vec![0.0; n]);
        let coords: Vec<usize> = match opts.max_coords {
            Some(k) if k < n => {
                let mut c = sample(rng, n, k).into_vec();
                // index 0 is where the corruption hook lands
                if !c.contains(&0) {
                    c[0] = 0;
                }
                c.sort_unstable();
                c
            }
            _ => (0..n).collect(),
        };
        let mut worst = 0.0f64;
        for &i in &coords {
            let orig = store.tensor(id).data()[i];
            store.get_mut(id).tensor.data_mut()[i] = orig + h;
            let fp = eval(store)?;
            store.get_mut(id).tensor.data_mut()[i] = orig - h;
            let fm = eval(store)?;
            store.get_mut(id).tensor.data_mut()[i] = orig;
            worst = worst.max(relative_error(analytic[i], (fp - fm) / (2.0 * h)));
        }
        out.push(ParamCheck {
            name: store.get(id).name.clone(),
            coords_checked: coords.len(),
            max_rel_error: worst,
        });
    }
    Ok(out)
}
