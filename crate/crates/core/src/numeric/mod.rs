//! Dense linear algebra and seeded randomness.

mod matrix;
mod rng;

pub use matrix::{ElementwiseOp, Matrix};
pub(crate) use matrix::dot;
pub use rng::RngStream;

/// Glorot-uniform initialisation: entries in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(rows: usize, cols: usize, rng: &mut RngStream) -> Matrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.uniform_unchecked(-limit, limit))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("length matches by construction")
}
