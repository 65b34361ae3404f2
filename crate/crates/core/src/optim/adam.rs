use crate::error::{Error, Result};
use crate::numeric::Matrix;

/// Bias-corrected Adam with one pair of moment buffers per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Default for AdamState {
    fn default() -> Self {
        Self::new(1e-4)
    }
}

impl AdamState {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Matrix] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Matrix] {
        &self.v
    }

    /// Applies one update. `grads` pairs each gradient with its parameter name
    /// and must list tensors in the same order as `params`. Buffers are
    /// allocated on the first call and shape-checked on every later one.
    ///
    /// Nothing is modified when any gradient entry is non-finite.
    pub fn step(&mut self, params: Vec<&mut Matrix>, grads: &[(String, &Matrix)]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::shape(
                "adam_step",
                format!("{} parameter tensors", params.len()),
                format!("{} gradient tensors", grads.len()),
            ));
        }
        for (p, (name, g)) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(Error::shape(
                    "adam_step",
                    format!("parameter {name} {}x{}", p.rows(), p.cols()),
                    format!("gradient {}x{}", g.rows(), g.cols()),
                ));
            }
            if let Some(bad) = g.as_slice().iter().find(|v| !v.is_finite()) {
                return Err(Error::Training {
                    param: name.clone(),
                    message: format!("non-finite gradient entry {bad}"),
                });
            }
        }
        if self.m.is_empty() {
            self.m = grads.iter().map(|(_, g)| Matrix::zeros(g.rows(), g.cols())).collect();
            self.v = self.m.clone();
        } else if self.m.len() != grads.len() || self.m.iter().zip(grads).any(|(m, (_, g))| m.shape() != g.shape()) {
            return Err(Error::state("adam moment buffers do not match the parameter set"));
        }

        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.epsilon);
        for (((p, (_, g)), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            let iter = p
                .as_mut_slice()
                .iter_mut()
                .zip(g.as_slice())
                .zip(m.as_mut_slice().iter_mut().zip(v.as_mut_slice()));
            for ((w, &gi), (mi, vi)) in iter {
                *mi = b1 * *mi + (1.0 - b1) * gi;
                *vi = b2 * *vi + (1.0 - b2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
