//! Adam and the mini-batch training loop with validation-based selection.

mod adam;
mod train;

pub use adam::AdamState;
pub use train::{accuracy, train, EpochRecord, History, Preset, TrainConfig, TrainOutcome};
