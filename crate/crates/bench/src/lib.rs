//! Shared fixtures for the criterion benches.

use od2rnn_core::data::generate_synthetic;
use od2rnn_core::forest::flatten_features;
use od2rnn_core::pipeline::{prepare_dataset, ExperimentConfig};
use od2rnn_core::{LossWeights, Od2rnnModel, Preset, RngStream, SitsDataset, Source, SynthSpec};

/// The default synthetic dataset, gap-filled and normalised.
pub fn prepared_dataset() -> SitsDataset {
    let raw = generate_synthetic(&SynthSpec::default(), &mut RngStream::new(0)).expect("default spec is valid");
    prepare_dataset(&raw).expect("synthetic data prepares").0
}

/// A freshly initialised network sized for `ds` under `preset`.
pub fn model(ds: &SitsDataset, preset: Preset) -> Od2rnnModel {
    let config = ExperimentConfig::new(preset, 0, 1).model_config(ds, LossWeights::default());
    Od2rnnModel::new(config, &mut RngStream::new(1)).expect("preset config is valid")
}

/// Flattened feature rows and labels of every object.
pub fn forest_rows(ds: &SitsDataset, source: Source) -> (Vec<Vec<f64>>, Vec<usize>) {
    ds.samples
        .iter()
        .map(|s| (flatten_features(s, source), s.label))
        .unzip()
}
