//! Gated recurrent unit.
//!
//! ```text
//! z_t = sigmoid(W_z x_t + U_z h_{t-1} + b_z)
//! r_t = sigmoid(W_r x_t + U_r h_{t-1} + b_r)
//! c_t = tanh(W_h x_t + U_h (r_t * h_{t-1}) + b_h)
//! h_t = (1 - z_t) * h_{t-1} + z_t * c_t
//! ```

use super::{check_len, sigmoid, Tensors};
use crate::error::{Error, Result};
use crate::numeric::{glorot_uniform, Matrix, RngStream};

#[derive(Clone, Debug, PartialEq)]
pub struct GruCell {
    pub w_z: Matrix,
    pub w_r: Matrix,
    pub w_h: Matrix,
    pub u_z: Matrix,
    pub u_r: Matrix,
    pub u_h: Matrix,
    pub b_z: Matrix,
    pub b_r: Matrix,
    pub b_h: Matrix,
}

/// Gradients with the same layout as [`GruCell`].
pub type GruGrads = GruCell;

#[derive(Clone, Debug)]
pub struct GruStepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    candidate: Vec<f64>,
}

impl GruStepCache {
    pub fn update_gate(&self) -> &[f64] {
        &self.z
    }

    pub fn reset_gate(&self) -> &[f64] {
        &self.r
    }

    pub fn candidate(&self) -> &[f64] {
        &self.candidate
    }
}

/// Per-timestep caches of one [`GruCell::sequence`] call.
#[derive(Clone, Debug)]
pub struct GruTrace {
    steps: Vec<GruStepCache>,
}

impl GruTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[GruStepCache] {
        &self.steps
    }
}

#[derive(Clone, Debug)]
pub struct GruBackward {
    pub grads: GruGrads,
    pub grad_inputs: Vec<Vec<f64>>,
    pub grad_h0: Vec<f64>,
}

impl GruCell {
    pub fn new(inputs: usize, hidden: usize, rng: &mut RngStream) -> Self {
        Self {
            w_z: glorot_uniform(hidden, inputs, rng),
            w_r: glorot_uniform(hidden, inputs, rng),
            w_h: glorot_uniform(hidden, inputs, rng),
            u_z: glorot_uniform(hidden, hidden, rng),
            u_r: glorot_uniform(hidden, hidden, rng),
            u_h: glorot_uniform(hidden, hidden, rng),
            b_z: Matrix::zeros(hidden, 1),
            b_r: Matrix::zeros(hidden, 1),
            b_h: Matrix::zeros(hidden, 1),
        }
    }

    pub fn zeros(inputs: usize, hidden: usize) -> Self {
        Self {
            w_z: Matrix::zeros(hidden, inputs),
            w_r: Matrix::zeros(hidden, inputs),
            w_h: Matrix::zeros(hidden, inputs),
            u_z: Matrix::zeros(hidden, hidden),
            u_r: Matrix::zeros(hidden, hidden),
            u_h: Matrix::zeros(hidden, hidden),
            b_z: Matrix::zeros(hidden, 1),
            b_r: Matrix::zeros(hidden, 1),
            b_h: Matrix::zeros(hidden, 1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.inputs(), self.hidden())
    }

    pub fn inputs(&self) -> usize {
        self.w_z.cols()
    }

    pub fn hidden(&self) -> usize {
        self.w_z.rows()
    }

    pub fn step(&self, x: &[f64], h_prev: &[f64]) -> Result<(Vec<f64>, GruStepCache)> {
        check_len("gru_step", "GRU input", self.inputs(), x)?;
        check_len("gru_step", "GRU hidden state", self.hidden(), h_prev)?;
        Ok(self.step_unchecked(x, h_prev))
    }

    fn step_unchecked(&self, x: &[f64], h_prev: &[f64]) -> (Vec<f64>, GruStepCache) {
        let gate = |w: &Matrix, u: &Matrix, b: &Matrix, h: &[f64]| {
            let mut a = b.as_slice().to_vec();
            w.matvec_acc(x, &mut a);
            u.matvec_acc(h, &mut a);
            a
        };
        let z: Vec<f64> = gate(&self.w_z, &self.u_z, &self.b_z, h_prev)
            .into_iter()
            .map(sigmoid)
            .collect();
        let r: Vec<f64> = gate(&self.w_r, &self.u_r, &self.b_r, h_prev)
            .into_iter()
            .map(sigmoid)
            .collect();
        let reset_h: Vec<f64> = r.iter().zip(h_prev).map(|(r, h)| r * h).collect();
        let candidate: Vec<f64> = gate(&self.w_h, &self.u_h, &self.b_h, &reset_h)
            .into_iter()
            .map(f64::tanh)
            .collect();
        let h: Vec<f64> = (0..h_prev.len())
            .map(|i| (1.0 - z[i]) * h_prev[i] + z[i] * candidate[i])
            .collect();
        (
            h,
            GruStepCache {
                x: x.to_vec(),
                h_prev: h_prev.to_vec(),
                z,
                r,
                candidate,
            },
        )
    }

    /// Runs the cell over `xs` from `h0`, returning `h_1 .. h_T`.
    pub fn sequence<X: AsRef<[f64]>>(&self, xs: &[X], h0: &[f64]) -> Result<(Vec<Vec<f64>>, GruTrace)> {
        if xs.is_empty() {
            return Err(Error::argument("GRU sequence must contain at least one timestep"));
        }
        check_len("gru_sequence", "GRU hidden state", self.hidden(), h0)?;
        let mut states = Vec::with_capacity(xs.len());
        let mut steps = Vec::with_capacity(xs.len());
        let mut h = h0.to_vec();
        for x in xs {
            let x = x.as_ref();
            check_len("gru_sequence", "GRU input", self.inputs(), x)?;
            let (next, cache) = self.step_unchecked(x, &h);
            states.push(next.clone());
            steps.push(cache);
            h = next;
        }
        Ok((states, GruTrace { steps }))
    }

    /// Backpropagates one step. `grad_h` is the total gradient reaching `h_t`;
    /// parameter gradients are added into `grads`. Returns `(dx_t, dh_{t-1})`.
    pub fn step_backward(
        &self,
        cache: &GruStepCache,
        grad_h: &[f64],
        grads: &mut GruGrads,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        check_len("gru_backward", "hidden-state gradient", self.hidden(), grad_h)?;
        let n = self.hidden();
        let GruStepCache {
            x,
            h_prev,
            z,
            r,
            candidate,
        } = cache;

        let mut grad_h_prev: Vec<f64> = (0..n).map(|i| grad_h[i] * (1.0 - z[i])).collect();
        let grad_cand_pre: Vec<f64> = (0..n)
            .map(|i| grad_h[i] * z[i] * (1.0 - candidate[i] * candidate[i]))
            .collect();
        let grad_z_pre: Vec<f64> = (0..n)
            .map(|i| grad_h[i] * (candidate[i] - h_prev[i]) * z[i] * (1.0 - z[i]))
            .collect();

        let reset_h: Vec<f64> = r.iter().zip(h_prev).map(|(r, h)| r * h).collect();
        let mut grad_reset_h = vec![0.0; n];
        self.u_h.tmatvec_acc(&grad_cand_pre, &mut grad_reset_h);
        let grad_r_pre: Vec<f64> = (0..n)
            .map(|i| grad_reset_h[i] * h_prev[i] * r[i] * (1.0 - r[i]))
            .collect();
        for i in 0..n {
            grad_h_prev[i] += grad_reset_h[i] * r[i];
        }

        grads.w_h.add_outer(&grad_cand_pre, x);
        grads.u_h.add_outer(&grad_cand_pre, &reset_h);
        grads.b_h.add_column(&grad_cand_pre);
        grads.w_z.add_outer(&grad_z_pre, x);
        grads.u_z.add_outer(&grad_z_pre, h_prev);
        grads.b_z.add_column(&grad_z_pre);
        grads.w_r.add_outer(&grad_r_pre, x);
        grads.u_r.add_outer(&grad_r_pre, h_prev);
        grads.b_r.add_column(&grad_r_pre);

        let mut grad_x = vec![0.0; self.inputs()];
        self.w_z.tmatvec_acc(&grad_z_pre, &mut grad_x);
        self.w_r.tmatvec_acc(&grad_r_pre, &mut grad_x);
        self.w_h.tmatvec_acc(&grad_cand_pre, &mut grad_x);
        self.u_z.tmatvec_acc(&grad_z_pre, &mut grad_h_prev);
        self.u_r.tmatvec_acc(&grad_r_pre, &mut grad_h_prev);

        Ok((grad_x, grad_h_prev))
    }

    /// Backpropagation through time. `grads_h[t]` is the gradient of the loss
    /// with respect to output `h_{t+1}` taken directly (not through later steps).
    pub fn backward<G: AsRef<[f64]>>(&self, trace: &GruTrace, grads_h: &[G]) -> Result<GruBackward> {
        if trace.is_empty() {
            return Err(Error::state("GRU backward called without a forward trace"));
        }
        if grads_h.len() != trace.len() {
            return Err(Error::shape(
                "gru_backward",
                format!("trace of {} timesteps", trace.len()),
                format!("{} hidden-state gradients", grads_h.len()),
            ));
        }
        let mut grads = self.zeros_like();
        let mut grad_inputs = vec![Vec::new(); trace.len()];
        let mut carry = vec![0.0; self.hidden()];
        for t in (0..trace.len()).rev() {
            let direct = grads_h[t].as_ref();
            check_len("gru_backward", "hidden-state gradient", self.hidden(), direct)?;
            let total: Vec<f64> = direct.iter().zip(&carry).map(|(a, b)| a + b).collect();
            let (gx, gh) = self.step_backward(&trace.steps[t], &total, &mut grads)?;
            grad_inputs[t] = gx;
            carry = gh;
        }
        Ok(GruBackward {
            grads,
            grad_inputs,
            grad_h0: carry,
        })
    }
}

impl Tensors for GruCell {
    fn tensors(&self) -> Vec<(&'static str, &Matrix)> {
        vec![
            ("w_z", &self.w_z),
            ("w_r", &self.w_r),
            ("w_h", &self.w_h),
            ("u_z", &self.u_z),
            ("u_r", &self.u_r),
            ("u_h", &self.u_h),
            ("b_z", &self.b_z),
            ("b_r", &self.b_r),
            ("b_h", &self.b_h),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![
            &mut self.w_z,
            &mut self.w_r,
            &mut self.w_h,
            &mut self.u_z,
            &mut self.u_r,
            &mut self.u_h,
            &mut self.b_z,
            &mut self.b_r,
            &mut self.b_h,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_weights(inputs: usize, hidden: usize) -> GruCell {
        let mut cell = GruCell::zeros(inputs, hidden);
        for w in [&mut cell.w_z, &mut cell.w_r, &mut cell.w_h, &mut cell.u_z, &mut cell.u_r, &mut cell.u_h] {
            w.fill(1.0);
        }
        cell
    }

    #[test]
    fn zero_cell_from_zero_state() {
        let cell = GruCell::zeros(2, 3);
        let (h, cache) = cell.step(&[0.7, -0.2], &[0.0; 3]).unwrap();
        assert_eq!(h, vec![0.0; 3]);
        assert_eq!(cache.update_gate(), &[0.5; 3]);
        assert_eq!(cache.reset_gate(), &[0.5; 3]);
        assert_eq!(cache.candidate(), &[0.0; 3]);
    }

    #[test]
    fn zero_cell_halves_state() {
        let cell = GruCell::zeros(2, 3);
        let (h, _) = cell.step(&[1.0, 1.0], &[0.4, -0.8, 2.0]).unwrap();
        assert_eq!(h, vec![0.2, -0.4, 1.0]);
    }

    #[test]
    fn scalar_hand_computation() {
        let cell = unit_weights(1, 1);
        let (h, cache) = cell.step(&[1.0], &[0.0]).unwrap();
        let s1 = 1.0 / (1.0 + (-1f64).exp());
        assert!((cache.update_gate()[0] - s1).abs() < 1e-15);
        assert!((cache.update_gate()[0] - 0.7311).abs() < 1e-4);
        assert!((cache.candidate()[0] - 0.7616).abs() < 1e-4);
        assert!((h[0] - s1 * 1f64.tanh()).abs() < 1e-15);
        assert!((h[0] - 0.5568).abs() < 1e-4);
    }

    #[test]
    fn sequence_base_case_and_errors() {
        let cell = GruCell::new(3, 4, &mut RngStream::new(8));
        let x = vec![0.1, 0.2, 0.3];
        let (seq, _) = cell.sequence(std::slice::from_ref(&x), &[0.0; 4]).unwrap();
        let (single, _) = cell.step(&x, &[0.0; 4]).unwrap();
        assert_eq!(seq, vec![single]);
        let empty: Vec<Vec<f64>> = vec![];
        assert!(matches!(cell.sequence(&empty, &[0.0; 4]), Err(Error::Argument(_))));
        assert!(matches!(cell.sequence(&[vec![1.0]], &[0.0; 4]), Err(Error::Shape { .. })));
    }

    #[test]
    fn zero_cell_fixed_point() {
        let cell = GruCell::zeros(2, 2);
        let xs = vec![vec![1.0, 2.0]; 6];
        let (seq, _) = cell.sequence(&xs, &[0.0; 2]).unwrap();
        assert!(seq.iter().all(|h| h == &vec![0.0, 0.0]));
    }

    #[test]
    fn zero_upstream_gradient() {
        let cell = GruCell::new(3, 4, &mut RngStream::new(1));
        let xs = vec![vec![0.3, -0.1, 0.5]; 5];
        let (_, trace) = cell.sequence(&xs, &[0.0; 4]).unwrap();
        let back = cell.backward(&trace, &vec![vec![0.0; 4]; 5]).unwrap();
        assert!(back.grads.tensors().iter().all(|(_, t)| t.max_abs() == 0.0));
        assert!(back.grad_inputs.iter().flatten().all(|&v| v == 0.0));
        assert!(back.grad_h0.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_step_backward_equals_sequence_backward() {
        let cell = GruCell::new(3, 4, &mut RngStream::new(2));
        let x = vec![0.3, -0.1, 0.5];
        let h0 = vec![0.1, 0.0, -0.2, 0.3];
        let g = vec![0.5, -1.0, 0.25, 2.0];
        let (_, cache) = cell.step(&x, &h0).unwrap();
        let mut grads = cell.zeros_like();
        let (gx, gh) = cell.step_backward(&cache, &g, &mut grads).unwrap();
        let (_, trace) = cell.sequence(&[x], &h0).unwrap();
        let back = cell.backward(&trace, &[g]).unwrap();
        assert_eq!(back.grads, grads);
        assert_eq!(back.grad_inputs[0], gx);
        assert_eq!(back.grad_h0, gh);
    }

    #[test]
    fn gradient_count_mismatch_is_a_shape_error() {
        let cell = GruCell::new(1, 2, &mut RngStream::new(2));
        let (_, trace) = cell.sequence(&[vec![1.0], vec![2.0]], &[0.0; 2]).unwrap();
        assert!(matches!(cell.backward(&trace, &[vec![0.0; 2]]), Err(Error::Shape { .. })));
    }

    proptest! {
        #[test]
        fn hidden_states_stay_in_unit_box(seed in any::<u64>(), t in 1usize..12, scale in 0.1f64..20.0) {
            let mut rng = RngStream::new(seed);
            let mut cell = GruCell::new(3, 5, &mut rng);
            for m in cell.tensors_mut() {
                m.scale(scale);
            }
            let xs: Vec<Vec<f64>> = (0..t).map(|_| rng.uniform(-10.0, 10.0, 3).unwrap()).collect();
            let (seq, _) = cell.sequence(&xs, &[0.0; 5]).unwrap();
            for h in &seq {
                prop_assert!(h.iter().all(|v| v.abs() <= 1.0));
            }
        }
    }
}
