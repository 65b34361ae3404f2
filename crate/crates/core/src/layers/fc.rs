use super::{check_len, Tensors};
use crate::error::Result;
use crate::numeric::{glorot_uniform, Matrix, RngStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

/// Fully connected layer `y = act(W x + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FcLayer {
    pub weight: Matrix,
    pub bias: Matrix,
}

#[derive(Clone, Debug)]
pub struct FcCache {
    input: Vec<f64>,
    pre_activation: Vec<f64>,
    activation: Activation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FcGrads {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl FcLayer {
    pub fn new(inputs: usize, outputs: usize, rng: &mut RngStream) -> Self {
        Self {
            weight: glorot_uniform(outputs, inputs, rng),
            bias: Matrix::zeros(outputs, 1),
        }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Matrix::zeros(outputs, inputs),
            bias: Matrix::zeros(outputs, 1),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &[f64], activation: Activation) -> Result<(Vec<f64>, FcCache)> {
        check_len("fc_forward", "layer input", self.inputs(), x)?;
        let mut pre = self.bias.as_slice().to_vec();
        self.weight.matvec_acc(x, &mut pre);
        let out = match activation {
            Activation::Relu => pre.iter().map(|&v| v.max(0.0)).collect(),
            Activation::Identity => pre.clone(),
        };
        Ok((
            out,
            FcCache {
                input: x.to_vec(),
                pre_activation: pre,
                activation,
            },
        ))
    }

    pub fn backward(&self, cache: &FcCache, grad_out: &[f64]) -> Result<(Vec<f64>, FcGrads)> {
        let mut grads = FcGrads::zeros_like(self);
        let grad_in = self.backward_acc(cache, grad_out, &mut grads)?;
        Ok((grad_in, grads))
    }

    /// Like [`FcLayer::backward`] but adds parameter gradients into `grads`,
    /// for layers applied at every timestep.
    pub fn backward_acc(&self, cache: &FcCache, grad_out: &[f64], grads: &mut FcGrads) -> Result<Vec<f64>> {
        check_len("fc_backward", "layer output", self.outputs(), grad_out)?;
        let grad_pre: Vec<f64> = match cache.activation {
            Activation::Relu => grad_out
                .iter()
                .zip(&cache.pre_activation)
                .map(|(&g, &z)| if z > 0.0 { g } else { 0.0 })
                .collect(),
            Activation::Identity => grad_out.to_vec(),
        };
        grads.weight.add_outer(&grad_pre, &cache.input);
        grads.bias.add_column(&grad_pre);
        let mut grad_in = vec![0.0; self.inputs()];
        self.weight.tmatvec_acc(&grad_pre, &mut grad_in);
        Ok(grad_in)
    }
}

impl FcGrads {
    pub fn zeros_like(layer: &FcLayer) -> Self {
        Self {
            weight: Matrix::zeros(layer.outputs(), layer.inputs()),
            bias: Matrix::zeros(layer.outputs(), 1),
        }
    }
}

impl Tensors for FcLayer {
    fn tensors(&self) -> Vec<(&'static str, &Matrix)> {
        vec![("weight", &self.weight), ("bias", &self.bias)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.weight, &mut self.bias]
    }
}

impl Tensors for FcGrads {
    fn tensors(&self) -> Vec<(&'static str, &Matrix)> {
        vec![("weight", &self.weight), ("bias", &self.bias)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.weight, &mut self.bias]
    }
}
