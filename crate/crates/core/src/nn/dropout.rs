use alloc::vec::Vec;

use rand::Rng as _;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Training/inference switch carrying the dropout random stream.
#[derive(Debug, Clone)]
pub struct Mode {
    training: bool,
    rng: Option<Rng>,
}

impl Mode {
    pub fn inference() -> Self {
        Mode {
            training: false,
            rng: None,
        }
    }

    pub fn training(rng: Rng) -> Self {
        Mode {
            training: true,
            rng: Some(rng),
        }
    }

    pub fn is_training(&self) -> bool {
        self.training
    }

    pub fn dropout(&mut self, tape: &mut Tape<'_>, x: Var, rate: f64) -> Result<Var> {
        match (self.training, self.rng.as_mut()) {
            (true, Some(rng)) => dropout_apply(tape, x, rate, true, rng),
            _ if (0.0..1.0).contains(&rate) => Ok(x),
            _ => Err(Error::contract(alloc::format!("dropout rate {rate} outside [0, 1)"))),
        }
    }
}

/// Inverted dropout: in training, each entry is zeroed with probability
/// `rate` and survivors are scaled by `1/(1-rate)`. Inference is the identity.
pub fn dropout_apply(tape: &mut Tape<'_>, x: Var, rate: f64, training: bool, rng: &mut Rng) -> Result<Var> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::contract(alloc::format!("dropout rate {rate} outside [0, 1)")));
    }
    if !training || rate == 0.0 {
        return Ok(x);
    }
    let keep = 1.0 / (1.0 - rate);
    let n = tape.value(x).len();
    let mask: Vec<f64> = (0..n)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect();
    let shape = tape.shape(x).to_vec();
    let m = tape.constant(&shape, mask)?;
    tape.mul(x, m)
}
