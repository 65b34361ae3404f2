//! Forward and analytic backward passes for the network blocks.
//!
//! Every forward call returns its output together with a cache value; the
//! matching backward call consumes that cache. Caches are plain data, so a
//! layer can be shared read-only across many in-flight passes.

mod attention;
mod dropout;
mod fc;
mod gru;
mod softmax;

pub use attention::{AttentionCache, AttentionGrads, AttentionHead, AttentionOutput};
pub use dropout::DropoutMask;
pub use fc::{Activation, FcCache, FcGrads, FcLayer};
pub use gru::{GruBackward, GruCell, GruGrads, GruStepCache, GruTrace};
pub use softmax::{sigmoid, softmax, softmax_cross_entropy, CrossEntropy};

use crate::numeric::Matrix;

/// Whether a pass is part of training (dropout active, trace kept) or not.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Uniform access to the learnable tensors of a layer, or to a gradient
/// container with the same layout.
pub trait Tensors {
    fn tensors(&self) -> Vec<(&'static str, &Matrix)>;
    fn tensors_mut(&mut self) -> Vec<&mut Matrix>;
}

pub(crate) fn check_len(op: &'static str, what: &str, expected: usize, got: &[f64]) -> crate::Result<()> {
    if got.len() != expected {
        return Err(crate::Error::shape(
            op,
            format!("{what} of length {expected}"),
            format!("vector of length {}", got.len()),
        ));
    }
    Ok(())
}
