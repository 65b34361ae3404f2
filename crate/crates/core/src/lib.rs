//! Object-level fusion of radar (Sentinel-1) and optical (Sentinel-2) satellite
//! image time series with a two-branch recurrent network.
//!
//! Each branch enriches every timestamp with two fully connected layers,
//! runs a GRU over the sequence and pools the hidden states with additive
//! temporal attention. The two pooled features feed three softmax
//! classifiers: one per branch plus one on the concatenation. Training
//! minimises `0.5 * L_radar + 0.5 * L_optical + L_fusion`.
//!
//! Around the network the crate provides the full experimental pipeline:
//! dataset I/O and preprocessing ([`data`]), a Random Forest baseline
//! ([`forest`]), Adam training with validation-based model selection
//! ([`optim`]), confusion-matrix metrics ([`metrics`]) and end-to-end
//! experiment drivers ([`pipeline`]).

pub mod data;
pub mod error;
pub mod forest;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod numeric;
pub mod optim;
pub mod pipeline;

pub use data::{ObjectSample, SitsDataset, SplitSpec, SynthSpec};
pub use error::{Error, Result};
pub use forest::{ForestConfig, RandomForest, Source};
pub use layers::Mode;
pub use metrics::{AggregateReport, ConfusionMatrix, EvaluationReport};
pub use model::{LossWeights, ModelConfig, Od2rnnModel, StreamConfig};
pub use numeric::{Matrix, RngStream};
pub use optim::{AdamState, Preset, TrainConfig};
