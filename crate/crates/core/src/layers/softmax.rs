use crate::error::{Error, Result};

/// Logistic function in the sign-split form that never exponentiates a large
/// positive number.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossEntropy {
    pub loss: f64,
    pub probs: Vec<f64>,
    /// `probs - one_hot(true_class)`
    pub grad_logits: Vec<f64>,
}

pub fn softmax_cross_entropy(logits: &[f64], true_class: usize) -> Result<CrossEntropy> {
    if true_class >= logits.len() {
        return Err(Error::argument(format!(
            "class {true_class} out of range for {} logits",
            logits.len()
        )));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
    let loss = log_sum - (logits[true_class] - max);
    let probs = softmax(logits);
    let mut grad_logits = probs.clone();
    grad_logits[true_class] -= 1.0;
    Ok(CrossEntropy {
        loss: loss.max(0.0),
        probs,
        grad_logits,
    })
}
