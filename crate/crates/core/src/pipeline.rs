//! End-to-end experiment drivers shared by the command-line tool and the
//! acceptance tests.
//!
//! All randomness flows from one root seed. Repeat `r` uses
//! `substream("init", r)` for network weights, `substream("train", r)` for
//! shuffling and dropout, and `substream("rf", r)` for the forests; the
//! partitions come from [`split`] with the same seed, so every method sees
//! identical splits.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{fill_and_index, normalize, split, Normalizer, ObjectSample, Partition, SitsDataset, SplitSpec};
use crate::error::{Error, Result};
use crate::forest::{flatten_features, grid_search, ForestConfig, ForestGrid, Source};
use crate::metrics::{aggregate, overall_row, AggregateReport, ConfusionMatrix, EvaluationReport};
use crate::model::{Checkpoint, LossWeights, ModelConfig, Od2rnnModel};
use crate::numeric::RngStream;
use crate::optim::{train, Preset, TrainConfig, TrainOutcome};

/// Receives one human-readable line per finished unit of work.
pub type Progress<'a> = &'a mut dyn FnMut(&str);

/// A progress sink that drops everything.
pub fn quiet() -> impl FnMut(&str) {
    |_: &str| {}
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub seed: u64,
    pub split: SplitSpec,
    /// Template for every network run; its seed is replaced per repeat.
    pub train: TrainConfig,
    pub grid: ForestGrid,
}

impl ExperimentConfig {
    pub fn new(preset: Preset, seed: u64, splits: usize) -> Self {
        Self {
            preset,
            seed,
            split: SplitSpec {
                seed,
                repeats: splits,
                ..SplitSpec::default()
            },
            train: preset.train_config(seed),
            grid: match preset {
                Preset::Paper => ForestGrid::paper(),
                Preset::Desk => ForestGrid::desk(),
            },
        }
    }

    fn root(&self) -> RngStream {
        RngStream::new(self.seed)
    }

    /// Network configuration for `dataset`: preset sizes, dataset band counts.
    pub fn model_config(&self, dataset: &SitsDataset, weights: LossWeights) -> ModelConfig {
        let shape = dataset.shape();
        let mut config = self.preset.model_config(shape.num_classes);
        config.optical.input_bands = shape.optical_bands;
        config.radar.input_bands = shape.radar_bands;
        config.loss_weights = weights;
        config
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Forest(Source),
    /// Both streams with the three-classifier loss.
    Od2rnn,
    /// Optical stream and its classifier alone.
    Od2rnnOptical,
    /// Radar stream and its classifier alone.
    Od2rnnRadar,
}

impl Method {
    /// Rows of the comparison table, in order.
    pub const COMPARISON: [Method; 4] = [
        Method::Forest(Source::S1),
        Method::Forest(Source::S2),
        Method::Forest(Source::S1S2),
        Method::Od2rnn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Forest(s) => s.method_name(),
            Method::Od2rnn => "OD2RNN",
            Method::Od2rnnOptical => "OD2RNN(S2)",
            Method::Od2rnnRadar => "OD2RNN(S1)",
        }
    }

    fn loss_weights(self) -> Option<LossWeights> {
        match self {
            Method::Forest(_) => None,
            Method::Od2rnn => Some(LossWeights::default()),
            Method::Od2rnnOptical => Some(LossWeights::optical_only()),
            Method::Od2rnnRadar => Some(LossWeights::radar_only()),
        }
    }
}

/// One method evaluated on the test part of every repeat.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub name: String,
    pub aggregate: AggregateReport,
    /// Partition digest of each repeat.
    pub digests: Vec<String>,
    /// Selected configuration per repeat (grid cell or best epoch).
    pub selections: Vec<String>,
}

/// Gap-fills, adds NDVI and normalises a raw dataset.
pub fn prepare_dataset(raw: &SitsDataset) -> Result<(SitsDataset, Normalizer)> {
    normalize(&fill_and_index(raw)?)
}

fn samples(ds: &SitsDataset, indices: &[usize]) -> Vec<ObjectSample> {
    ds.subset(indices)
}

pub fn evaluate_model(model: &Od2rnnModel, samples: &[ObjectSample]) -> Result<EvaluationReport> {
    let mut cm = ConfusionMatrix::new(model.num_classes());
    for s in samples {
        cm.accumulate(s.label, model.predict(s)?.class)?;
    }
    EvaluationReport::from_confusion(cm)
}

/// Result of one network training run on one repeat.
#[derive(Clone, Debug)]
pub struct NetworkRun {
    pub partition: Partition,
    pub outcome: TrainOutcome,
    pub test_report: EvaluationReport,
}

/// Trains a network on repeat `repeat` of a prepared dataset.
pub fn train_network(prepared: &SitsDataset, config: &ExperimentConfig, weights: LossWeights, repeat: usize) -> Result<NetworkRun> {
    train_network_with(prepared, config, config.model_config(prepared, weights), repeat)
}

/// [`train_network`] with an explicit network configuration.
pub fn train_network_with(prepared: &SitsDataset, config: &ExperimentConfig, model_config: ModelConfig, repeat: usize) -> Result<NetworkRun> {
    let partition = split(prepared, &config.split, repeat)?;
    let root = config.root();
    let model = Od2rnnModel::new(model_config, &mut root.substream("init", repeat as u64))?;
    let train_config = TrainConfig {
        seed: root.substream("train", repeat as u64).seed(),
        ..config.train.clone()
    };
    let outcome = train(
        model,
        &samples(prepared, &partition.train),
        &samples(prepared, &partition.validation),
        &train_config,
    )?;
    let test_report = evaluate_model(&outcome.best_model, &samples(prepared, &partition.test))?;
    Ok(NetworkRun {
        partition,
        outcome,
        test_report,
    })
}

fn rows_and_labels(ds: &SitsDataset, indices: &[usize], source: Source) -> (Vec<Vec<f64>>, Vec<usize>) {
    indices
        .iter()
        .map(|&i| (flatten_features(&ds.samples[i], source), ds.samples[i].label))
        .unzip()
}

/// Grid search on train/validation, then test evaluation of the winner.
pub fn run_forest(prepared: &SitsDataset, config: &ExperimentConfig, source: Source, repeat: usize) -> Result<(Partition, ForestConfig, EvaluationReport)> {
    let partition = split(prepared, &config.split, repeat)?;
    let train = rows_and_labels(prepared, &partition.train, source);
    let validation = rows_and_labels(prepared, &partition.validation, source);
    let (test_rows, test_labels) = rows_and_labels(prepared, &partition.test, source);
    let seed = config.root().substream("rf", repeat as u64).seed();
    let result = grid_search(
        (&train.0, &train.1),
        (&validation.0, &validation.1),
        prepared.num_classes(),
        &config.grid,
        seed,
    )?;
    let mut cm = ConfusionMatrix::new(prepared.num_classes());
    for (row, &y) in test_rows.iter().zip(&test_labels) {
        cm.accumulate(y, result.forest.predict(row)?.class)?;
    }
    Ok((partition, result.best, EvaluationReport::from_confusion(cm)?))
}

/// Runs `method` on every repeat of `config.split`.
pub fn run_method(prepared: &SitsDataset, config: &ExperimentConfig, method: Method, progress: Progress<'_>) -> Result<MethodResult> {
    config.split.validate()?;
    let mut reports = Vec::new();
    let mut digests = Vec::new();
    let mut selections = Vec::new();
    for repeat in 0..config.split.repeats {
        let (partition, selection, report) = match method.loss_weights() {
            None => {
                let Method::Forest(source) = method else { unreachable!() };
                let (p, best, report) = run_forest(prepared, config, source, repeat)?;
                (p, format!("trees={} depth={}", best.num_trees, best.max_depth), report)
            }
            Some(weights) => {
                let run = train_network(prepared, config, weights, repeat)?;
                let selection = format!(
                    "epoch={} val_acc={:.4}",
                    run.outcome.best_epoch, run.outcome.best_validation_accuracy
                );
                (run.partition, selection, run.test_report)
            }
        };
        progress(&format!(
            "{} split {repeat}: partition {} accuracy {:.4} ({selection})",
            method.name(),
            partition.digest(),
            report.accuracy
        ));
        digests.push(partition.digest());
        selections.push(selection);
        reports.push(report);
    }
    Ok(MethodResult {
        method,
        name: method.name().to_string(),
        aggregate: aggregate(&reports)?,
        digests,
        selections,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub class_names: Vec<String>,
    pub methods: Vec<MethodResult>,
}

impl Comparison {
    /// Fails unless every method saw the same partition sequence.
    pub fn check_partitions(&self) -> Result<()> {
        if let Some(first) = self.methods.first() {
            if let Some(m) = self.methods.iter().find(|m| m.digests != first.digests) {
                return Err(Error::state(format!(
                    "{} and {} were evaluated on different partitions",
                    first.name, m.name
                )));
            }
        }
        Ok(())
    }

    pub fn method(&self, method: Method) -> Option<&MethodResult> {
        self.methods.iter().find(|m| m.method == method)
    }

    /// Overall table, per-class F table and partition digests. Contains no
    /// timings, so equal inputs render byte-identical text.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<12} {:>16} {:>18} {:>16}", "Method", "F-Measure", "Kappa", "Accuracy");
        for m in &self.methods {
            let _ = writeln!(out, "{}", overall_row(&m.name, &m.aggregate));
        }
        let _ = writeln!(out);
        let width = self.class_names.iter().map(String::len).max().unwrap_or(0).max(5);
        let _ = write!(out, "{:<width$}", "Class");
        for m in &self.methods {
            let _ = write!(out, " {:>16}", m.name);
        }
        out.push('\n');
        for (c, name) in self.class_names.iter().enumerate() {
            let _ = write!(out, "{name:<width$}");
            for m in &self.methods {
                let _ = write!(out, " {:>16}", m.aggregate.per_class_f[c].percent());
            }
            out.push('\n');
        }
        let _ = writeln!(out);
        if let Some(first) = self.methods.first() {
            for (r, d) in first.digests.iter().enumerate() {
                let _ = writeln!(out, "split {r}: partition {d}");
            }
        }
        out
    }
}

/// Runs the four comparison methods on identical partitions.
pub fn compare(prepared: &SitsDataset, config: &ExperimentConfig, progress: Progress<'_>) -> Result<Comparison> {
    compare_methods(prepared, config, &Method::COMPARISON, progress)
}

pub fn compare_methods(prepared: &SitsDataset, config: &ExperimentConfig, methods: &[Method], progress: Progress<'_>) -> Result<Comparison> {
    let methods = methods
        .iter()
        .map(|&m| run_method(prepared, config, m, &mut *progress))
        .collect::<Result<Vec<_>>>()?;
    let comparison = Comparison {
        class_names: prepared.class_names.clone(),
        methods,
    };
    comparison.check_partitions()?;
    Ok(comparison)
}

/// Which part of each repeat a checkpoint is scored on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Train,
    Validation,
    Test,
}

impl std::str::FromStr for Part {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Part::Train),
            "validation" | "val" => Ok(Part::Validation),
            "test" => Ok(Part::Test),
            other => Err(Error::argument(format!("unknown part {other:?} (expected train, validation or test)"))),
        }
    }
}

/// Applies the checkpoint's stored scaling (or fits one when absent) and
/// checks that the dataset fits the network.
pub fn prepare_for_checkpoint(raw: &SitsDataset, checkpoint: &Checkpoint) -> Result<SitsDataset> {
    let filled = fill_and_index(raw)?;
    let prepared = match &checkpoint.normalizer {
        Some(n) => n.apply(&filled)?,
        None => normalize(&filled)?.0,
    };
    let shape = prepared.shape();
    let cfg = &checkpoint.model.config;
    let expected = (cfg.optical.input_bands, cfg.radar.input_bands, cfg.num_classes);
    let found = (shape.optical_bands, shape.radar_bands, shape.num_classes);
    if expected != found {
        return Err(Error::shape(
            "checkpoint/dataset",
            format!(
                "checkpoint expecting {} optical bands, {} radar bands, {} classes",
                expected.0, expected.1, expected.2
            ),
            format!(
                "dataset with {} optical bands, {} radar bands, {} classes",
                found.0, found.1, found.2
            ),
        ));
    }
    Ok(prepared)
}

/// Scores a fixed model on `part` of each of `spec.repeats` partitions.
pub fn evaluate_checkpoint(raw: &SitsDataset, checkpoint: &Checkpoint, spec: &SplitSpec, part: Part) -> Result<(AggregateReport, Vec<String>)> {
    let prepared = prepare_for_checkpoint(raw, checkpoint)?;
    spec.validate()?;
    let mut reports = Vec::new();
    let mut digests = Vec::new();
    for repeat in 0..spec.repeats {
        let p = split(&prepared, spec, repeat)?;
        let indices = match part {
            Part::Train => &p.train,
            Part::Validation => &p.validation,
            Part::Test => &p.test,
        };
        reports.push(evaluate_model(&checkpoint.model, &samples(&prepared, indices))?);
        digests.push(p.digest());
    }
    Ok((aggregate(&reports)?, digests))
}
