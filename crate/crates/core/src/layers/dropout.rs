use super::Mode;
use crate::error::{Error, Result};
use crate::numeric::RngStream;

/// Inverted dropout. In train mode each entry survives with probability
/// `1 - rate` and survivors are scaled by `1 / (1 - rate)`; eval mode is the
/// identity.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMask {
    rate: f64,
    mode: Mode,
    /// Per-entry multiplier (0 or `1 / (1 - rate)`) from the last `apply`.
    scale: Option<Vec<f64>>,
}

impl DropoutMask {
    pub fn new(rate: f64, mode: Mode) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::argument(format!("dropout rate must be in [0, 1), got {rate}")));
        }
        Ok(Self {
            rate,
            mode,
            scale: None,
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    fn is_identity(&self) -> bool {
        self.mode == Mode::Eval || self.rate == 0.0
    }

    /// Samples a fresh mask for `x` and applies it.
    pub fn apply(&mut self, x: &[f64], rng: &mut RngStream) -> Vec<f64> {
        if self.is_identity() {
            self.scale = None;
            return x.to_vec();
        }
        let keep = 1.0 / (1.0 - self.rate);
        let scale: Vec<f64> = x
            .iter()
            .map(|_| if rng.bernoulli(self.rate) { 0.0 } else { keep })
            .collect();
        let out = x.iter().zip(&scale).map(|(v, s)| v * s).collect();
        self.scale = Some(scale);
        out
    }

    /// Routes an upstream gradient through the last sampled mask.
    pub fn backward(&self, grad: &[f64]) -> Vec<f64> {
        match &self.scale {
            Some(scale) => grad.iter().zip(scale).map(|(g, s)| g * s).collect(),
            None => grad.to_vec(),
        }
    }
}
