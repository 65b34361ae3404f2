use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::AdamState;
use crate::data::ObjectSample;
use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::model::{argmax, combine_probabilities, LossBreakdown, ModelConfig, Od2rnnModel};
use crate::numeric::RngStream;

/// Named hyperparameter sets for the network and its training loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// GRU 1024/512, FC 32/64, 1000 epochs at learning rate 1e-4.
    Paper,
    /// Small network and short schedule that trains on one CPU core in minutes.
    Desk,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Paper => "paper",
            Preset::Desk => "desk",
        }
    }

    pub fn model_config(self, num_classes: usize) -> ModelConfig {
        match self {
            Preset::Paper => ModelConfig::paper(num_classes),
            Preset::Desk => ModelConfig::desk(num_classes),
        }
    }

    pub fn train_config(self, seed: u64) -> TrainConfig {
        match self {
            Preset::Paper => TrainConfig {
                seed,
                ..TrainConfig::default()
            },
            Preset::Desk => TrainConfig {
                epochs: 60,
                batch_size: 16,
                learning_rate: 3e-3,
                seed,
                preset: Preset::Desk,
                checkpoint_path: None,
            },
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            other => Err(Error::argument(format!("unknown preset {other:?} (expected paper or desk)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub preset: Preset,
    /// Where callers persist the selected model; the loop itself does no I/O.
    pub checkpoint_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            batch_size: 32,
            learning_rate: 1e-4,
            seed: 0,
            preset: Preset::Paper,
            checkpoint_path: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::argument("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::argument("batch size must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::argument(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        Ok(())
    }
}

/// Mean training losses (train-mode passes, before each batch update) and
/// accuracies for one epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: LossBreakdown,
    pub train_accuracy: f64,
    pub validation_accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("epoch\ttrain_loss\tloss_radar\tloss_optical\tloss_fusion\ttrain_accuracy\tvalidation_accuracy\n");
        for r in &self.epochs {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.epoch, r.loss.total, r.loss.radar, r.loss.optical, r.loss.fusion, r.train_accuracy, r.validation_accuracy
            );
        }
        out
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn best_validation_accuracy(&self) -> Option<f64> {
        self.epochs.iter().map(|r| r.validation_accuracy).reduce(f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub best_model: Od2rnnModel,
    /// 1-based epoch the best model was taken from.
    pub best_epoch: usize,
    pub best_validation_accuracy: f64,
    pub history: History,
}

/// Fraction of samples whose eval-mode prediction matches the label.
pub fn accuracy(model: &Od2rnnModel, samples: &[ObjectSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::argument("accuracy over an empty sample set"));
    }
    let mut correct = 0usize;
    for s in samples {
        if model.predict(s)?.class == s.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / samples.len() as f64)
}

/// Mini-batch Adam over `train`, keeping the parameters with the best
/// validation accuracy (earliest epoch on ties).
///
/// Randomness: epoch `e` shuffles with `substream("shuffle", e)` and the
/// sample at training index `i` draws its dropout masks from
/// `substream("dropout", e).substream("sample", i)` of the root seed.
pub fn train(
    model: Od2rnnModel,
    train: &[ObjectSample],
    validation: &[ObjectSample],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() || validation.is_empty() {
        return Err(Error::argument(format!(
            "training needs nonempty train and validation parts (got {} and {})",
            train.len(),
            validation.len()
        )));
    }
    let root = RngStream::new(config.seed);
    let mut model = model;
    let mut adam = AdamState::new(config.learning_rate);
    let mut history = History::default();
    let mut best: Option<(Od2rnnModel, usize, f64)> = None;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=config.epochs {
        let epoch_key = epoch as u64;
        root.substream("shuffle", epoch_key).shuffle(&mut order);
        let dropout = root.substream("dropout", epoch_key);
        let mut sums = [0.0f64; 4];
        let mut correct = 0usize;

        for batch in order.chunks(config.batch_size) {
            let mut grads = model.zero_grads();
            for &i in batch {
                let sample = &train[i];
                let pass = model.forward(sample, Mode::Train, &dropout.substream("sample", i as u64))?;
                let loss = model.pass_loss(&pass, sample.label)?;
                for (acc, v) in sums.iter_mut().zip([loss.total, loss.radar, loss.optical, loss.fusion]) {
                    *acc += v;
                }
                let probs = combine_probabilities(
                    model.config.loss_weights,
                    &crate::layers::softmax(&pass.logits_radar),
                    &crate::layers::softmax(&pass.logits_optical),
                    &crate::layers::softmax(&pass.logits_fusion),
                );
                if argmax(&probs) == sample.label {
                    correct += 1;
                }
                grads.accumulate(&model.backward(&pass, sample.label)?);
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(model.tensors_mut(), &grads.tensors())?;
        }

        let n = train.len() as f64;
        let validation_accuracy = accuracy(&model, validation)?;
        history.epochs.push(EpochRecord {
            epoch,
            loss: LossBreakdown {
                total: sums[0] / n,
                radar: sums[1] / n,
                optical: sums[2] / n,
                fusion: sums[3] / n,
            },
            train_accuracy: correct as f64 / n,
            validation_accuracy,
        });
        if best.as_ref().map_or(true, |(_, _, acc)| validation_accuracy > *acc) {
            best = Some((model.clone(), epoch, validation_accuracy));
        }
    }

    let (best_model, best_epoch, best_validation_accuracy) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        best_model,
        best_epoch,
        best_validation_accuracy,
        history,
    })
}
