//! The two-branch network.
//!
//! ```text
//! optical series ─ FC1 ─ dropout ─ FC2 ─ GRU ─ dropout ─ attention ─ opt_feat ──┬─ classifier_optical
//!                                                                                 ├─ classifier_fusion([radar_feat, opt_feat])
//! radar series   ─ FC1 ─ dropout ─ FC2 ─ GRU ─ dropout ─ attention ─ radar_feat ─┴─ classifier_radar
//! ```
//!
//! The FC layers are applied to every timestamp with shared weights.

mod checkpoint;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};

use serde::{Deserialize, Serialize};

use crate::data::ObjectSample;
use crate::error::{Error, Result};
use crate::layers::{
    softmax, softmax_cross_entropy, Activation, AttentionCache, AttentionGrads, AttentionHead, DropoutMask, FcCache,
    FcGrads, FcLayer, GruCell, GruGrads, GruTrace, Mode, Tensors,
};
use crate::numeric::{Matrix, RngStream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub input_bands: usize,
    pub fc1_units: usize,
    pub fc2_units: usize,
    pub hidden_units: usize,
    pub dropout_rate: f64,
}

impl StreamConfig {
    pub fn validate(&self, name: &str) -> Result<()> {
        if self.input_bands == 0 || self.fc1_units == 0 || self.fc2_units == 0 || self.hidden_units == 0 {
            return Err(Error::argument(format!("{name} stream: all unit counts must be at least 1")));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::argument(format!(
                "{name} stream: dropout rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

/// Weights of the three cross-entropy terms, reused to fuse predictions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub radar: f64,
    pub optical: f64,
    pub fusion: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            radar: 0.5,
            optical: 0.5,
            fusion: 1.0,
        }
    }
}

impl LossWeights {
    /// Only the optical branch and its classifier (single-source ablation).
    pub fn optical_only() -> Self {
        Self {
            radar: 0.0,
            optical: 1.0,
            fusion: 0.0,
        }
    }

    pub fn radar_only() -> Self {
        Self {
            radar: 1.0,
            optical: 0.0,
            fusion: 0.0,
        }
    }

    pub fn combine(&self, radar: f64, optical: f64, fusion: f64) -> f64 {
        self.radar * radar + self.optical * optical + self.fusion * fusion
    }

    fn uses_optical(&self) -> bool {
        self.optical > 0.0 || self.fusion > 0.0
    }

    fn uses_radar(&self) -> bool {
        self.radar > 0.0 || self.fusion > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let w = [self.radar, self.optical, self.fusion];
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::argument(format!("loss weights must be nonnegative with a positive sum, got {w:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub optical: StreamConfig,
    pub radar: StreamConfig,
    pub num_classes: usize,
    pub loss_weights: LossWeights,
}

impl ModelConfig {
    /// GRU 1024 / 512 hidden units, FC 32 and 64 units, dropout 0.4.
    pub fn paper(num_classes: usize) -> Self {
        let stream = |bands, hidden| StreamConfig {
            input_bands: bands,
            fc1_units: 32,
            fc2_units: 64,
            hidden_units: hidden,
            dropout_rate: 0.4,
        };
        Self {
            optical: stream(5, 1024),
            radar: stream(2, 512),
            num_classes,
            loss_weights: LossWeights::default(),
        }
    }

    /// Scaled-down sizes for CPU experiments: GRU 64 / 32, FC 8 and 16.
    pub fn desk(num_classes: usize) -> Self {
        let stream = |bands, hidden| StreamConfig {
            input_bands: bands,
            fc1_units: 8,
            fc2_units: 16,
            hidden_units: hidden,
            dropout_rate: 0.4,
        };
        Self {
            optical: stream(5, 64),
            radar: stream(2, 32),
            num_classes,
            loss_weights: LossWeights::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.optical.validate("optical")?;
        self.radar.validate("radar")?;
        self.loss_weights.validate()?;
        if self.num_classes < 1 {
            return Err(Error::argument("model needs at least one class"));
        }
        Ok(())
    }
}

/// FC enrichment, GRU and attention for one source.
#[derive(Clone, Debug, PartialEq)]
pub struct Stream {
    pub fc1: FcLayer,
    pub fc2: FcLayer,
    pub gru: GruCell,
    pub attention: AttentionHead,
    pub dropout_rate: f64,
}

#[derive(Clone, Debug)]
struct StreamTrace {
    fc1: Vec<FcCache>,
    fc_dropout: Vec<DropoutMask>,
    fc2: Vec<FcCache>,
    gru: GruTrace,
    hidden_dropout: Vec<DropoutMask>,
    attention: AttentionCache,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StreamGrads {
    pub fc1: FcGrads,
    pub fc2: FcGrads,
    pub gru: GruGrads,
    pub attention: AttentionGrads,
}

struct StreamOutput {
    feat: Vec<f64>,
    attention: Vec<f64>,
    trace: Option<StreamTrace>,
}

impl Stream {
    pub fn new(config: &StreamConfig, rng: &mut RngStream) -> Self {
        Self {
            fc1: FcLayer::new(config.input_bands, config.fc1_units, rng),
            fc2: FcLayer::new(config.fc1_units, config.fc2_units, rng),
            gru: GruCell::new(config.fc2_units, config.hidden_units, rng),
            attention: AttentionHead::new(config.hidden_units, rng),
            dropout_rate: config.dropout_rate,
        }
    }

    pub fn zeros(config: &StreamConfig) -> Self {
        Self {
            fc1: FcLayer::zeros(config.input_bands, config.fc1_units),
            fc2: FcLayer::zeros(config.fc1_units, config.fc2_units),
            gru: GruCell::zeros(config.fc2_units, config.hidden_units),
            attention: AttentionHead::zeros(config.hidden_units, config.hidden_units),
            dropout_rate: config.dropout_rate,
        }
    }

    pub fn hidden(&self) -> usize {
        self.gru.hidden()
    }

    fn forward(&self, steps: &[&[f64]], mode: Mode, rng: &mut RngStream) -> Result<StreamOutput> {
        let keep = mode == Mode::Train;
        let mut fc1 = Vec::with_capacity(steps.len());
        let mut fc_dropout = Vec::with_capacity(steps.len());
        let mut fc2 = Vec::with_capacity(steps.len());
        let mut enriched = Vec::with_capacity(steps.len());
        for x in steps {
            let (a1, c1) = self.fc1.forward(x, Activation::Relu)?;
            let mut mask = DropoutMask::new(self.dropout_rate, mode)?;
            let d1 = mask.apply(&a1, rng);
            let (a2, c2) = self.fc2.forward(&d1, Activation::Relu)?;
            enriched.push(a2);
            if keep {
                fc1.push(c1);
                fc_dropout.push(mask);
                fc2.push(c2);
            }
        }
        let (states, gru) = self.gru.sequence(&enriched, &vec![0.0; self.hidden()])?;
        let mut hidden_dropout = Vec::with_capacity(states.len());
        let dropped: Vec<Vec<f64>> = states
            .iter()
            .map(|h| {
                let mut mask = DropoutMask::new(self.dropout_rate, mode)?;
                let d = mask.apply(h, rng);
                hidden_dropout.push(mask);
                Ok(d)
            })
            .collect::<Result<_>>()?;
        let (out, attention) = self.attention.forward(&dropped)?;
        let trace = keep.then_some(StreamTrace {
            fc1,
            fc_dropout,
            fc2,
            gru,
            hidden_dropout,
            attention,
        });
        Ok(StreamOutput {
            feat: out.feat,
            attention: out.weights,
            trace,
        })
    }

    fn backward(&self, trace: &StreamTrace, grad_feat: &[f64]) -> Result<StreamGrads> {
        let (attention, grad_dropped) = self.attention.backward(&trace.attention, grad_feat)?;
        let grads_h: Vec<Vec<f64>> = grad_dropped
            .iter()
            .zip(&trace.hidden_dropout)
            .map(|(g, mask)| mask.backward(g))
            .collect();
        let gru_back = self.gru.backward(&trace.gru, &grads_h)?;
        let mut fc1 = FcGrads::zeros_like(&self.fc1);
        let mut fc2 = FcGrads::zeros_like(&self.fc2);
        for t in 0..trace.fc2.len() {
            let g_d1 = self.fc2.backward_acc(&trace.fc2[t], &gru_back.grad_inputs[t], &mut fc2)?;
            let g_a1 = trace.fc_dropout[t].backward(&g_d1);
            self.fc1.backward_acc(&trace.fc1[t], &g_a1, &mut fc1)?;
        }
        Ok(StreamGrads {
            fc1,
            fc2,
            gru: gru_back.grads,
            attention,
        })
    }

    fn zero_grads(&self) -> StreamGrads {
        StreamGrads {
            fc1: FcGrads::zeros_like(&self.fc1),
            fc2: FcGrads::zeros_like(&self.fc2),
            gru: self.gru.zeros_like(),
            attention: self.attention.zeros_like(),
        }
    }
}

fn stream_tensors<'a>(
    prefix: &str,
    fc1: &'a impl Tensors,
    fc2: &'a impl Tensors,
    gru: &'a impl Tensors,
    attention: &'a impl Tensors,
) -> Vec<(String, &'a Matrix)> {
    let mut out = Vec::new();
    for (layer, t) in [("fc1", fc1.tensors()), ("fc2", fc2.tensors()), ("gru", gru.tensors()), ("attention", attention.tensors())] {
        out.extend(t.into_iter().map(|(n, m)| (format!("{prefix}.{layer}.{n}"), m)));
    }
    out
}

impl StreamGrads {
    fn tensors(&self, prefix: &str) -> Vec<(String, &Matrix)> {
        stream_tensors(prefix, &self.fc1, &self.fc2, &self.gru, &self.attention)
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = self.fc1.tensors_mut();
        out.extend(self.fc2.tensors_mut());
        out.extend(self.gru.tensors_mut());
        out.extend(self.attention.tensors_mut());
        out
    }
}

/// The pooled per-source features.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamFeatures {
    pub radar_feat: Vec<f64>,
    pub opt_feat: Vec<f64>,
}

impl StreamFeatures {
    /// `[radar_feat, opt_feat]`
    pub fn concatenated(&self) -> Vec<f64> {
        let mut v = self.radar_feat.clone();
        v.extend_from_slice(&self.opt_feat);
        v
    }
}

#[derive(Clone, Debug)]
struct ModelTrace {
    optical: Option<StreamTrace>,
    radar: Option<StreamTrace>,
    classifier_radar: FcCache,
    classifier_optical: FcCache,
    classifier_fusion: FcCache,
}

/// Outputs of one forward pass. Train-mode passes also carry the trace needed
/// by [`Od2rnnModel::backward`].
#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub features: StreamFeatures,
    pub logits_radar: Vec<f64>,
    pub logits_optical: Vec<f64>,
    pub logits_fusion: Vec<f64>,
    pub optical_attention: Vec<f64>,
    pub radar_attention: Vec<f64>,
    trace: Option<ModelTrace>,
}

impl ForwardPass {
    pub fn has_trace(&self) -> bool {
        self.trace.is_some()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub radar: f64,
    pub optical: f64,
    pub fusion: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub class: usize,
    pub probs: Vec<f64>,
}

/// Gradients laid out like the model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub optical: StreamGrads,
    pub radar: StreamGrads,
    pub classifier_radar: FcGrads,
    pub classifier_optical: FcGrads,
    pub classifier_fusion: FcGrads,
}

impl Gradients {
    pub fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = self.optical.tensors("optical");
        out.extend(self.radar.tensors("radar"));
        for (name, layer) in [
            ("classifier_radar", &self.classifier_radar),
            ("classifier_optical", &self.classifier_optical),
            ("classifier_fusion", &self.classifier_fusion),
        ] {
            out.extend(layer.tensors().into_iter().map(|(n, m)| (format!("{name}.{n}"), m)));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = self.optical.tensors_mut();
        out.extend(self.radar.tensors_mut());
        out.extend(self.classifier_radar.tensors_mut());
        out.extend(self.classifier_optical.tensors_mut());
        out.extend(self.classifier_fusion.tensors_mut());
        out
    }

    /// `self += other`, tensor by tensor in parameter order.
    pub fn accumulate(&mut self, other: &Gradients) {
        let others: Vec<&Matrix> = other.tensors().into_iter().map(|(_, m)| m).collect();
        for (mine, theirs) in self.tensors_mut().into_iter().zip(others) {
            mine.axpy(1.0, theirs).expect("gradient layouts match");
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for m in self.tensors_mut() {
            m.scale(factor);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Od2rnnModel {
    pub config: ModelConfig,
    pub optical: Stream,
    pub radar: Stream,
    pub classifier_radar: FcLayer,
    pub classifier_optical: FcLayer,
    pub classifier_fusion: FcLayer,
}

impl Od2rnnModel {
    /// Glorot-initialised weights, zero biases.
    pub fn new(config: ModelConfig, rng: &mut RngStream) -> Result<Self> {
        config.validate()?;
        let optical = Stream::new(&config.optical, rng);
        let radar = Stream::new(&config.radar, rng);
        let (h_o, h_r, c) = (config.optical.hidden_units, config.radar.hidden_units, config.num_classes);
        Ok(Self {
            classifier_radar: FcLayer::new(h_r, c, rng),
            classifier_optical: FcLayer::new(h_o, c, rng),
            classifier_fusion: FcLayer::new(h_r + h_o, c, rng),
            optical,
            radar,
            config,
        })
    }

    /// Every parameter zero.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let (h_o, h_r, c) = (config.optical.hidden_units, config.radar.hidden_units, config.num_classes);
        Ok(Self {
            optical: Stream::zeros(&config.optical),
            radar: Stream::zeros(&config.radar),
            classifier_radar: FcLayer::zeros(h_r, c),
            classifier_optical: FcLayer::zeros(h_o, c),
            classifier_fusion: FcLayer::zeros(h_r + h_o, c),
            config,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    pub fn loss_weights(&self) -> LossWeights {
        self.config.loss_weights
    }

    /// Named parameters in canonical order.
    pub fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = stream_tensors("optical", &self.optical.fc1, &self.optical.fc2, &self.optical.gru, &self.optical.attention);
        out.extend(stream_tensors("radar", &self.radar.fc1, &self.radar.fc2, &self.radar.gru, &self.radar.attention));
        for (name, layer) in [
            ("classifier_radar", &self.classifier_radar),
            ("classifier_optical", &self.classifier_optical),
            ("classifier_fusion", &self.classifier_fusion),
        ] {
            out.extend(layer.tensors().into_iter().map(|(n, m)| (format!("{name}.{n}"), m)));
        }
        out
    }

    /// Mutable parameters, same order as [`Od2rnnModel::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = Vec::new();
        for s in [&mut self.optical, &mut self.radar] {
            out.extend(s.fc1.tensors_mut());
            out.extend(s.fc2.tensors_mut());
            out.extend(s.gru.tensors_mut());
            out.extend(s.attention.tensors_mut());
        }
        out.extend(self.classifier_radar.tensors_mut());
        out.extend(self.classifier_optical.tensors_mut());
        out.extend(self.classifier_fusion.tensors_mut());
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, m)| m.len()).sum()
    }

    pub fn zero_grads(&self) -> Gradients {
        Gradients {
            optical: self.optical.zero_grads(),
            radar: self.radar.zero_grads(),
            classifier_radar: FcGrads::zeros_like(&self.classifier_radar),
            classifier_optical: FcGrads::zeros_like(&self.classifier_optical),
            classifier_fusion: FcGrads::zeros_like(&self.classifier_fusion),
        }
    }

    fn check_sample(&self, sample: &ObjectSample) -> Result<()> {
        for (what, series, expected) in [
            ("optical", &sample.optical, self.config.optical.input_bands),
            ("radar", &sample.radar, self.config.radar.input_bands),
        ] {
            if series.cols() != expected {
                return Err(Error::shape(
                    "model forward",
                    format!("{what} stream expecting {expected} bands"),
                    format!("object {} with {} {what} bands", sample.object_id, series.cols()),
                ));
            }
        }
        Ok(())
    }

    /// Runs both streams and the three classifiers. Dropout masks are drawn
    /// from per-stream substreams of `rng`, so a pass is a pure function of
    /// `(parameters, sample, mode, rng seed)`.
    pub fn forward(&self, sample: &ObjectSample, mode: Mode, rng: &RngStream) -> Result<ForwardPass> {
        self.check_sample(sample)?;
        let weights = self.config.loss_weights;
        let run = |stream: &Stream, used: bool, steps: Vec<&[f64]>, label: &str| -> Result<StreamOutput> {
            if used {
                stream.forward(&steps, mode, &mut rng.substream(label, 0))
            } else {
                Ok(StreamOutput {
                    feat: vec![0.0; stream.hidden()],
                    attention: Vec::new(),
                    trace: None,
                })
            }
        };
        let optical = run(&self.optical, weights.uses_optical(), sample.optical_steps(), "optical-dropout")?;
        let radar = run(&self.radar, weights.uses_radar(), sample.radar_steps(), "radar-dropout")?;
        let features = StreamFeatures {
            radar_feat: radar.feat,
            opt_feat: optical.feat,
        };
        let (logits_radar, classifier_radar) = self.classifier_radar.forward(&features.radar_feat, Activation::Identity)?;
        let (logits_optical, classifier_optical) = self.classifier_optical.forward(&features.opt_feat, Activation::Identity)?;
        let (logits_fusion, classifier_fusion) = self
            .classifier_fusion
            .forward(&features.concatenated(), Activation::Identity)?;
        let trace = (mode == Mode::Train).then_some(ModelTrace {
            optical: optical.trace,
            radar: radar.trace,
            classifier_radar,
            classifier_optical,
            classifier_fusion,
        });
        Ok(ForwardPass {
            features,
            logits_radar,
            logits_optical,
            logits_fusion,
            optical_attention: optical.attention,
            radar_attention: radar.attention,
            trace,
        })
    }

    /// Weighted sum of the three cross-entropies.
    pub fn loss(&self, logits_radar: &[f64], logits_optical: &[f64], logits_fusion: &[f64], true_class: usize) -> Result<LossBreakdown> {
        let c = self.num_classes();
        if [logits_radar.len(), logits_optical.len(), logits_fusion.len()] != [c, c, c] {
            return Err(Error::shape(
                "loss",
                format!("{c} classes"),
                format!(
                    "logits of lengths {}, {}, {}",
                    logits_radar.len(),
                    logits_optical.len(),
                    logits_fusion.len()
                ),
            ));
        }
        let radar = softmax_cross_entropy(logits_radar, true_class)?.loss;
        let optical = softmax_cross_entropy(logits_optical, true_class)?.loss;
        let fusion = softmax_cross_entropy(logits_fusion, true_class)?.loss;
        Ok(LossBreakdown {
            total: self.config.loss_weights.combine(radar, optical, fusion),
            radar,
            optical,
            fusion,
        })
    }

    pub fn pass_loss(&self, pass: &ForwardPass, true_class: usize) -> Result<LossBreakdown> {
        self.loss(&pass.logits_radar, &pass.logits_optical, &pass.logits_fusion, true_class)
    }

    /// Analytic gradient of the weighted total loss for a train-mode pass.
    pub fn backward(&self, pass: &ForwardPass, true_class: usize) -> Result<Gradients> {
        let trace = pass
            .trace
            .as_ref()
            .ok_or_else(|| Error::state("backward needs a train-mode forward pass"))?;
        let w = self.config.loss_weights;
        let scaled = |logits: &[f64], weight: f64| -> Result<Vec<f64>> {
            let ce = softmax_cross_entropy(logits, true_class)?;
            Ok(ce.grad_logits.into_iter().map(|g| weight * g).collect())
        };
        let g_radar = scaled(&pass.logits_radar, w.radar)?;
        let g_optical = scaled(&pass.logits_optical, w.optical)?;
        let g_fusion = scaled(&pass.logits_fusion, w.fusion)?;

        let (mut grad_radar_feat, classifier_radar) = self.classifier_radar.backward(&trace.classifier_radar, &g_radar)?;
        let (mut grad_opt_feat, classifier_optical) = self.classifier_optical.backward(&trace.classifier_optical, &g_optical)?;
        let (grad_concat, classifier_fusion) = self.classifier_fusion.backward(&trace.classifier_fusion, &g_fusion)?;
        let (from_fusion_radar, from_fusion_opt) = grad_concat.split_at(grad_radar_feat.len());
        for (g, f) in grad_radar_feat.iter_mut().zip(from_fusion_radar) {
            *g += f;
        }
        for (g, f) in grad_opt_feat.iter_mut().zip(from_fusion_opt) {
            *g += f;
        }

        let optical = match &trace.optical {
            Some(t) => self.optical.backward(t, &grad_opt_feat)?,
            None => self.optical.zero_grads(),
        };
        let radar = match &trace.radar {
            Some(t) => self.radar.backward(t, &grad_radar_feat)?,
            None => self.radar.zero_grads(),
        };
        Ok(Gradients {
            optical,
            radar,
            classifier_radar,
            classifier_optical,
            classifier_fusion,
        })
    }

    /// Eval-mode prediction from the weighted mixture of the three softmax
    /// outputs (renormalised by the weight sum).
    pub fn predict(&self, sample: &ObjectSample) -> Result<Prediction> {
        let pass = self.forward(sample, Mode::Eval, &RngStream::new(0))?;
        let probs = combine_probabilities(
            self.config.loss_weights,
            &softmax(&pass.logits_radar),
            &softmax(&pass.logits_optical),
            &softmax(&pass.logits_fusion),
        );
        Ok(Prediction {
            class: argmax(&probs),
            probs,
        })
    }
}

/// `(w_r p_r + w_o p_o + w_f p_f) / (w_r + w_o + w_f)`
pub fn combine_probabilities(weights: LossWeights, radar: &[f64], optical: &[f64], fusion: &[f64]) -> Vec<f64> {
    let norm = weights.radar + weights.optical + weights.fusion;
    (0..fusion.len())
        .map(|c| weights.combine(radar[c], optical[c], fusion[c]) / norm)
        .collect()
}

/// Index of the maximum; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(classes: usize) -> ModelConfig {
        let stream = |bands| StreamConfig {
            input_bands: bands,
            fc1_units: 3,
            fc2_units: 3,
            hidden_units: 2,
            dropout_rate: 0.4,
        };
        ModelConfig {
            optical: stream(5),
            radar: stream(2),
            num_classes: classes,
            loss_weights: LossWeights::default(),
        }
    }

    fn sample(rng: &mut RngStream, t_opt: usize, t_rad: usize) -> ObjectSample {
        ObjectSample {
            object_id: "x".into(),
            label: 1,
            optical: Matrix::from_vec(t_opt, 5, rng.uniform(0.0, 1.0, t_opt * 5).unwrap()).unwrap(),
            radar: Matrix::from_vec(t_rad, 2, rng.uniform(0.0, 1.0, t_rad * 2).unwrap()).unwrap(),
            optical_valid: vec![true; t_opt],
        }
    }

    #[test]
    fn eval_mode_is_deterministic() {
        let mut rng = RngStream::new(1);
        let model = Od2rnnModel::new(tiny_config(3), &mut rng).unwrap();
        let s = sample(&mut rng, 4, 3);
        let a = model.forward(&s, Mode::Eval, &RngStream::new(5)).unwrap();
        let b = model.forward(&s, Mode::Eval, &RngStream::new(99)).unwrap();
        assert_eq!(a.logits_fusion, b.logits_fusion);
        assert_eq!(a.logits_radar, b.logits_radar);
        assert!(!a.has_trace());
    }

    #[test]
    fn stream_attention_is_uniform_over_identical_hidden_states() {
        // Identical input timesteps do not give identical GRU states, so the
        // symmetry holds at the attention head, not at the raw series.
        let mut rng = RngStream::new(2);
        let model = Od2rnnModel::new(tiny_config(3), &mut rng).unwrap();
        let h = vec![vec![0.2, -0.1]; 5];
        let (out, _) = model.optical.attention.forward(&h).unwrap();
        assert!(out.weights.iter().all(|w| (w - 0.2).abs() < 1e-15));
        let s = sample(&mut rng, 5, 3);
        let pass = model.forward(&s, Mode::Eval, &RngStream::new(0)).unwrap();
        assert_eq!(pass.optical_attention.len(), 5);
        assert!((pass.optical_attention.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_model_is_uniform_and_picks_class_zero() {
        let model = Od2rnnModel::zeros(tiny_config(2)).unwrap();
        let s = sample(&mut RngStream::new(3), 3, 2);
        let pass = model.forward(&s, Mode::Eval, &RngStream::new(0)).unwrap();
        assert!(pass.logits_fusion.iter().chain(&pass.logits_radar).chain(&pass.logits_optical).all(|&l| l == 0.0));
        let p = model.predict(&s).unwrap();
        assert_eq!(p.probs, vec![0.5, 0.5]);
        assert_eq!(p.class, 0);
    }

    #[test]
    fn loss_weights_apply() {
        let w = LossWeights::default();
        assert!((w.combine(0.2, 0.4, 0.6) - 0.9).abs() < 1e-15);
        let model = Od2rnnModel::zeros(tiny_config(13)).unwrap();
        let zeros = vec![0.0; 13];
        let l = model.loss(&zeros, &zeros, &zeros, 3).unwrap();
        assert!((l.total - 2.0 * 13f64.ln()).abs() < 1e-12);
        assert!((l.total - 5.130).abs() < 1e-3);
        assert!(matches!(model.loss(&zeros, &zeros, &zeros, 13), Err(Error::Argument(_))));
    }

    #[test]
    fn probability_fusion() {
        let w = LossWeights::default();
        let p = [0.2, 0.5, 0.3];
        let combined = combine_probabilities(w, &p, &p, &p);
        for (a, b) in combined.iter().zip(&p) {
            assert!((a - b).abs() < 1e-15);
        }
        let c = combine_probabilities(w, &[1.0, 0.0], &[1.0, 0.0], &[0.5, 0.5]);
        assert_eq!(c, vec![0.75, 0.25]);
        assert_eq!(argmax(&c), 0);
        assert_eq!(argmax(&[0.3, 0.3, 0.3]), 0);
        assert_eq!(argmax(&[0.1, 0.3, 0.3]), 1);
    }

    #[test]
    fn band_mismatch_and_missing_trace() {
        let mut rng = RngStream::new(4);
        let model = Od2rnnModel::new(tiny_config(2), &mut rng).unwrap();
        let mut s = sample(&mut rng, 3, 2);
        let pass = model.forward(&s, Mode::Eval, &rng).unwrap();
        assert!(matches!(model.backward(&pass, 0), Err(Error::State(_))));
        s.radar = Matrix::zeros(2, 3);
        assert!(matches!(model.forward(&s, Mode::Eval, &rng), Err(Error::Shape { .. })));
    }

    #[test]
    fn tensor_listing_matches_gradients() {
        let model = Od2rnnModel::new(tiny_config(4), &mut RngStream::new(5)).unwrap();
        let grads = model.zero_grads();
        let names: Vec<String> = model.tensors().into_iter().map(|(n, _)| n).collect();
        let grad_names: Vec<String> = grads.tensors().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, grad_names);
        for ((_, p), (_, g)) in model.tensors().iter().zip(grads.tensors()) {
            assert_eq!(p.shape(), g.shape());
        }
        assert_eq!(model.classifier_fusion.inputs(), 4);
        assert!(names.contains(&"optical.gru.u_h".to_string()));
    }

    #[test]
    fn paper_preset_sizes() {
        let c = ModelConfig::paper(13);
        assert_eq!((c.optical.hidden_units, c.radar.hidden_units), (1024, 512));
        assert_eq!((c.optical.fc1_units, c.optical.fc2_units), (32, 64));
        assert_eq!(c.optical.dropout_rate, 0.4);
    }
}
