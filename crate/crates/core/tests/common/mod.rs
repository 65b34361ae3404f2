//! Finite-difference gradient oracles shared by the gradient and acceptance
//! tests. Only forward passes are used here; every analytic gradient is
//! compared against central differences of the scalar objective.

#![allow(dead_code)]

use od2rnn_core::layers::{softmax_cross_entropy, Activation, AttentionHead, FcLayer, GruCell, Tensors};
use od2rnn_core::{LossWeights, Matrix, Mode, ModelConfig, ObjectSample, Od2rnnModel, RngStream, StreamConfig};

pub const EPS: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

/// `‖a − n‖₂ / max(‖a‖₂, ‖n‖₂)`, zero when both vanish.
pub fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, n)| a - n).collect();
    let scale = norm(analytic).max(norm(numeric));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Central difference of `loss` with respect to each listed entry of `base`.
pub fn central_differences<T: Clone>(
    base: &T,
    coords: &[usize],
    entry: impl Fn(&mut T, usize) -> &mut f64,
    loss: impl Fn(&T) -> f64,
) -> Vec<f64> {
    coords
        .iter()
        .map(|&i| {
            let mut plus = base.clone();
            *entry(&mut plus, i) += EPS;
            let mut minus = base.clone();
            *entry(&mut minus, i) -= EPS;
            (loss(&plus) - loss(&minus)) / (2.0 * EPS)
        })
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn random_vec(rng: &mut RngStream, n: usize, scale: f64) -> Vec<f64> {
    rng.uniform(-scale, scale, n).unwrap()
}

fn all(n: usize) -> Vec<usize> {
    (0..n).collect()
}

fn tensor_entry<L: Tensors>(layer: &mut L, k: usize, i: usize) -> &mut f64 {
    &mut layer.tensors_mut().swap_remove(k).as_mut_slice()[i]
}

/// Worst relative error over the parameter tensors of `layer`.
fn layer_param_errors<L: Tensors + Clone>(layer: &L, grads: &impl Tensors, loss: impl Fn(&L) -> f64) -> f64 {
    let analytic = grads.tensors();
    let mut worst = 0.0f64;
    for (k, (_, param)) in layer.tensors().iter().enumerate() {
        let numeric = central_differences(layer, &all(param.len()), |l, i| tensor_entry(l, k, i), &loss);
        worst = worst.max(rel_error(analytic[k].1.as_slice(), &numeric));
    }
    worst
}

fn vec_errors(x: &[f64], analytic: &[f64], loss: impl Fn(&Vec<f64>) -> f64) -> f64 {
    let numeric = central_differences(&x.to_vec(), &all(x.len()), |v, i| &mut v[i], loss);
    rel_error(analytic, &numeric)
}

/// Fully connected layer under both activations; returns the worst error.
pub fn check_fc(instances: usize, seed: u64) -> f64 {
    let mut rng = RngStream::new(seed).substream("fc", 0);
    let mut worst = 0.0f64;
    for n in 0..instances {
        let (inputs, outputs) = (1 + rng.below(6), 1 + rng.below(6));
        let layer = FcLayer::new(inputs, outputs, &mut rng);
        let x = random_vec(&mut rng, inputs, 2.0);
        let c = random_vec(&mut rng, outputs, 1.0);
        let activation = if n % 2 == 0 { Activation::Relu } else { Activation::Identity };
        let (_, cache) = layer.forward(&x, activation).unwrap();
        let (grad_in, grads) = layer.backward(&cache, &c).unwrap();
        worst = worst.max(layer_param_errors(&layer, &grads, |l| dot(&c, &l.forward(&x, activation).unwrap().0)));
        worst = worst.max(vec_errors(&x, &grad_in, |v| dot(&c, &layer.forward(v, activation).unwrap().0)));
    }
    worst
}

/// One GRU step: parameters, input and previous state.
pub fn check_gru_step(instances: usize, seed: u64) -> f64 {
    let mut rng = RngStream::new(seed).substream("gru-step", 0);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (inputs, hidden) = (1 + rng.below(5), 1 + rng.below(5));
        let cell = GruCell::new(inputs, hidden, &mut rng);
        let x = random_vec(&mut rng, inputs, 1.5);
        let h = random_vec(&mut rng, hidden, 0.9);
        let c = random_vec(&mut rng, hidden, 1.0);
        let (_, cache) = cell.step(&x, &h).unwrap();
        let mut grads = GruCell::zeros(inputs, hidden);
        let (dx, dh) = cell.step_backward(&cache, &c, &mut grads).unwrap();
        worst = worst.max(layer_param_errors(&cell, &grads, |g| dot(&c, &g.step(&x, &h).unwrap().0)));
        worst = worst.max(vec_errors(&x, &dx, |v| dot(&c, &cell.step(v, &h).unwrap().0)));
        worst = worst.max(vec_errors(&h, &dh, |v| dot(&c, &cell.step(&x, v).unwrap().0)));
    }
    worst
}

/// GRU unrolled over `T ≤ 8` steps with a loss on every hidden state.
pub fn check_gru_sequence(instances: usize, seed: u64) -> f64 {
    let mut rng = RngStream::new(seed).substream("gru-seq", 0);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (inputs, hidden, steps) = (1 + rng.below(4), 1 + rng.below(4), 1 + rng.below(8));
        let cell = GruCell::new(inputs, hidden, &mut rng);
        let xs: Vec<Vec<f64>> = (0..steps).map(|_| random_vec(&mut rng, inputs, 1.5)).collect();
        let h0 = random_vec(&mut rng, hidden, 0.5);
        let cs: Vec<Vec<f64>> = (0..steps).map(|_| random_vec(&mut rng, hidden, 1.0)).collect();
        let objective = |cell: &GruCell, xs: &[Vec<f64>], h0: &[f64]| -> f64 {
            let (hs, _) = cell.sequence(xs, h0).unwrap();
            hs.iter().zip(&cs).map(|(h, c)| dot(h, c)).sum()
        };
        let (_, trace) = cell.sequence(&xs, &h0).unwrap();
        let back = cell.backward(&trace, &cs).unwrap();
        worst = worst.max(layer_param_errors(&cell, &back.grads, |g| objective(g, &xs, &h0)));
        worst = worst.max(vec_errors(&h0, &back.grad_h0, |v| objective(&cell, &xs, v)));
        let flat_x: Vec<f64> = xs.concat();
        let flat_grad: Vec<f64> = back.grad_inputs.concat();
        worst = worst.max(vec_errors(&flat_x, &flat_grad, |v| {
            let xs: Vec<Vec<f64>> = v.chunks(inputs).map(<[f64]>::to_vec).collect();
            objective(&cell, &xs, &h0)
        }));
    }
    worst
}

/// Additive attention: parameters and every hidden state.
pub fn check_attention(instances: usize, seed: u64) -> f64 {
    let mut rng = RngStream::new(seed).substream("attention", 0);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (hidden, steps) = (1 + rng.below(5), 1 + rng.below(7));
        let head = AttentionHead::new(hidden, &mut rng);
        let hs: Vec<Vec<f64>> = (0..steps).map(|_| random_vec(&mut rng, hidden, 1.0)).collect();
        let c = random_vec(&mut rng, hidden, 1.0);
        let (_, cache) = head.forward(&hs).unwrap();
        let (grads, grad_hs) = head.backward(&cache, &c).unwrap();
        worst = worst.max(layer_param_errors(&head, &grads, |a| dot(&c, &a.forward(&hs).unwrap().0.feat)));
        worst = worst.max(vec_errors(&hs.concat(), &grad_hs.concat(), |v| {
            let hs: Vec<Vec<f64>> = v.chunks(hidden).map(<[f64]>::to_vec).collect();
            dot(&c, &head.forward(&hs).unwrap().0.feat)
        }));
    }
    worst
}

pub fn check_softmax_cross_entropy(instances: usize, seed: u64) -> f64 {
    let mut rng = RngStream::new(seed).substream("softmax", 0);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let classes = 2 + rng.below(8);
        let logits = random_vec(&mut rng, classes, 6.0);
        let class = rng.below(classes);
        let ce = softmax_cross_entropy(&logits, class).unwrap();
        worst = worst.max(vec_errors(&logits, &ce.grad_logits, |v| softmax_cross_entropy(v, class).unwrap().loss));
    }
    worst
}

pub fn random_sample(rng: &mut RngStream, optical: (usize, usize), radar: (usize, usize), label: usize) -> ObjectSample {
    ObjectSample {
        object_id: "probe".into(),
        label,
        optical: Matrix::from_vec(optical.0, optical.1, rng.uniform(0.0, 1.0, optical.0 * optical.1).unwrap()).unwrap(),
        radar: Matrix::from_vec(radar.0, radar.1, rng.uniform(0.0, 1.0, radar.0 * radar.1).unwrap()).unwrap(),
        optical_valid: vec![true; optical.0],
    }
}

/// A desk-preset model over 5 optical and 2 radar bands.
pub fn desk_model(classes: usize, weights: LossWeights, rng: &mut RngStream) -> Od2rnnModel {
    let mut config = ModelConfig::desk(classes);
    config.optical = StreamConfig {
        input_bands: 5,
        ..config.optical
    };
    config.radar = StreamConfig {
        input_bands: 2,
        ..config.radar
    };
    config.loss_weights = weights;
    Od2rnnModel::new(config, rng).unwrap()
}

/// Zero biases put ReLU pre-activations exactly on the kink whenever a
/// layer's input is all zero, where central differences see the mean of the
/// one-sided slopes. Random biases move the probe to a differentiable point.
pub fn randomize_biases(model: &mut Od2rnnModel, rng: &mut RngStream) {
    let names: Vec<String> = model.tensors().into_iter().map(|(n, _)| n).collect();
    for (name, tensor) in names.iter().zip(model.tensors_mut()) {
        if name.ends_with("bias") || name.contains(".b_") {
            let n = tensor.len();
            tensor.as_mut_slice().copy_from_slice(&rng.uniform(-0.1, 0.1, n).unwrap());
        }
    }
}

/// End-to-end weighted loss of a 2-class desk model in train mode (fixed
/// dropout masks), checked on `coords_per_tensor` random entries of every
/// parameter tensor.
pub fn check_model(instances: usize, coords_per_tensor: usize, seed: u64) -> f64 {
    let mut rng = RngStream::new(seed).substream("model", 0);
    let mut worst = 0.0f64;
    for n in 0..instances {
        let mut model = desk_model(2, LossWeights::default(), &mut rng);
        randomize_biases(&mut model, &mut rng);
        let (t_opt, t_rad) = (2 + rng.below(4), 2 + rng.below(3));
        let sample = random_sample(&mut rng, (t_opt, 5), (t_rad, 2), n % 2);
        let dropout = rng.substream("dropout", n as u64);
        let objective = |m: &Od2rnnModel| {
            let pass = m.forward(&sample, Mode::Train, &dropout).unwrap();
            m.pass_loss(&pass, sample.label).unwrap().total
        };
        let pass = model.forward(&sample, Mode::Train, &dropout).unwrap();
        let grads = model.backward(&pass, sample.label).unwrap();
        let analytic = grads.tensors();
        for (k, (_, param)) in model.tensors().iter().enumerate() {
            let coords = rng.sample_indices(param.len(), coords_per_tensor);
            let numeric = central_differences(
                &model,
                &coords,
                |m, i| &mut m.tensors_mut().swap_remove(k).as_mut_slice()[i],
                objective,
            );
            let a: Vec<f64> = coords.iter().map(|&i| analytic[k].1.as_slice()[i]).collect();
            let e = rel_error(&a, &numeric);
            if e > TOLERANCE && std::env::var("GRAD_DEBUG").is_ok() {
                eprintln!("instance {n} tensor {} err {e:e} coords {coords:?}\n a {a:?}\n n {numeric:?}", analytic[k].0);
            }
            worst = worst.max(e);
        }
    }
    worst
}
