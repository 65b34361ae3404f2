//! Additive temporal attention pooling.
//!
//! `e_t = u^T tanh(W h_t + b)`, `lambda = softmax(e)`, `feat = sum_t lambda_t h_t`.

use super::{check_len, softmax, Tensors};
use crate::error::{Error, Result};
use crate::numeric::{dot, glorot_uniform, Matrix, RngStream};

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionHead {
    /// `attn x hidden`
    pub weight: Matrix,
    pub bias: Matrix,
    /// Context vector scoring each projected state.
    pub context: Matrix,
}

pub type AttentionGrads = AttentionHead;

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionOutput {
    pub feat: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct AttentionCache {
    states: Vec<Vec<f64>>,
    projected: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl AttentionCache {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl AttentionHead {
    /// A head whose attention dimension equals `hidden`.
    pub fn new(hidden: usize, rng: &mut RngStream) -> Self {
        Self {
            weight: glorot_uniform(hidden, hidden, rng),
            bias: Matrix::zeros(hidden, 1),
            context: glorot_uniform(hidden, 1, rng),
        }
    }

    pub fn zeros(hidden: usize, attn: usize) -> Self {
        Self {
            weight: Matrix::zeros(attn, hidden),
            bias: Matrix::zeros(attn, 1),
            context: Matrix::zeros(attn, 1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.hidden(), self.attn())
    }

    pub fn hidden(&self) -> usize {
        self.weight.cols()
    }

    pub fn attn(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward<H: AsRef<[f64]>>(&self, states: &[H]) -> Result<(AttentionOutput, AttentionCache)> {
        if states.is_empty() {
            return Err(Error::argument("attention over an empty sequence"));
        }
        let mut projected = Vec::with_capacity(states.len());
        let mut scores = Vec::with_capacity(states.len());
        for h in states {
            let h = h.as_ref();
            check_len("attention_forward", "hidden state", self.hidden(), h)?;
            let mut a = self.bias.as_slice().to_vec();
            self.weight.matvec_acc(h, &mut a);
            let s: Vec<f64> = a.into_iter().map(f64::tanh).collect();
            scores.push(dot(self.context.as_slice(), &s));
            projected.push(s);
        }
        let weights = softmax(&scores);
        let mut feat = vec![0.0; self.hidden()];
        for (h, &w) in states.iter().zip(&weights) {
            for (f, v) in feat.iter_mut().zip(h.as_ref()) {
                *f += w * v;
            }
        }
        let cache = AttentionCache {
            states: states.iter().map(|h| h.as_ref().to_vec()).collect(),
            projected,
            weights: weights.clone(),
        };
        Ok((AttentionOutput { feat, weights }, cache))
    }

    /// Returns parameter gradients and the gradient for every input state.
    pub fn backward(&self, cache: &AttentionCache, grad_feat: &[f64]) -> Result<(AttentionGrads, Vec<Vec<f64>>)> {
        check_len("attention_backward", "feature gradient", self.hidden(), grad_feat)?;
        let lambda = &cache.weights;
        let grad_lambda: Vec<f64> = cache.states.iter().map(|h| dot(grad_feat, h)).collect();
        let mean = dot(lambda, &grad_lambda);

        let mut grads = self.zeros_like();
        let mut grad_states = Vec::with_capacity(cache.states.len());
        for t in 0..cache.states.len() {
            let h = &cache.states[t];
            let s = &cache.projected[t];
            let mut gh: Vec<f64> = grad_feat.iter().map(|g| lambda[t] * g).collect();
            let grad_score = lambda[t] * (grad_lambda[t] - mean);
            if grad_score != 0.0 {
                let grad_pre: Vec<f64> = s
                    .iter()
                    .zip(self.context.as_slice())
                    .map(|(s, u)| grad_score * u * (1.0 - s * s))
                    .collect();
                for (gu, sv) in grads.context.as_mut_slice().iter_mut().zip(s) {
                    *gu += grad_score * sv;
                }
                grads.weight.add_outer(&grad_pre, h);
                grads.bias.add_column(&grad_pre);
                self.weight.tmatvec_acc(&grad_pre, &mut gh);
            }
            grad_states.push(gh);
        }
        Ok((grads, grad_states))
    }
}

impl Tensors for AttentionHead {
    fn tensors(&self) -> Vec<(&'static str, &Matrix)> {
        vec![
            ("weight", &self.weight),
            ("bias", &self.bias),
            ("context", &self.context),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.weight, &mut self.bias, &mut self.context]
    }
}
