use std::path::PathBuf;

use clap::builder::RangedU64ValueParser;
use clap::{Args, Parser, Subcommand, ValueEnum};
use od2rnn_core::pipeline::Part;
use od2rnn_core::{Preset, Source, SynthSpec};
use serde::Serialize;

fn positive() -> RangedU64ValueParser<usize> {
    RangedU64ValueParser::new().range(1..)
}

#[derive(Parser, Debug)]
#[command(
    name = "od2rnn",
    version,
    about = "Radar/optical time-series fusion with OD2RNN and Random Forest baselines"
)]
pub struct Cli {
    /// TOML file of flag values. Top-level keys apply to every command that
    /// has the flag; `[synth]`, `[train]`, … tables apply to one command.
    /// Command-line flags win over the file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset with confusable class pairs.
    #[command(args_override_self = true)]
    Synth(SynthArgs),
    /// Preprocess a dataset, train one network and write its checkpoint.
    #[command(args_override_self = true)]
    Train(TrainArgs),
    /// Score a checkpoint over repeated splits.
    #[command(args_override_self = true)]
    Eval(EvalArgs),
    /// Grid-searched Random Forest on one source.
    #[command(args_override_self = true)]
    Baseline(BaselineArgs),
    /// RF(S1), RF(S2), RF(S1,S2) and OD2RNN on identical splits.
    #[command(args_override_self = true)]
    Compare(CompareArgs),
}

impl Command {
    pub const NAMES: [&'static str; 5] = ["synth", "train", "eval", "baseline", "compare"];
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Dataset manifest to write; the table goes beside it as `<stem>.csv`.
    #[arg(long, value_name = "MANIFEST")]
    pub out: PathBuf,
    #[arg(long, default_value_t = SynthSpec::default().num_classes, value_parser = positive())]
    pub classes: usize,
    #[arg(long, default_value_t = SynthSpec::default().samples_per_class, value_parser = positive())]
    pub samples_per_class: usize,
    #[arg(long, default_value_t = SynthSpec::default().optical_steps, value_parser = positive())]
    pub optical_steps: usize,
    #[arg(long, default_value_t = SynthSpec::default().radar_steps, value_parser = positive())]
    pub radar_steps: usize,
    #[arg(long, default_value_t = SynthSpec::default().noise_sigma)]
    pub noise_sigma: f64,
    /// Probability that an optical date is cloudy.
    #[arg(long, default_value_t = SynthSpec::default().cloud_rate)]
    pub cloud_rate: f64,
    #[arg(long, default_value_t = SynthSpec::default().confusable_pairs)]
    pub confusable_pairs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SynthArgs {
    pub fn spec(&self) -> SynthSpec {
        SynthSpec {
            num_classes: self.classes,
            samples_per_class: self.samples_per_class,
            optical_steps: self.optical_steps,
            radar_steps: self.radar_steps,
            noise_sigma: self.noise_sigma,
            cloud_rate: self.cloud_rate,
            confusable_pairs: self.confusable_pairs,
        }
    }
}

/// Which classifiers the loss trains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Streams {
    Fusion,
    Optical,
    Radar,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Dataset manifest.
    #[arg(long, value_name = "MANIFEST")]
    pub data: PathBuf,
    /// Output directory for checkpoint, history and run manifest.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, default_value = "desk")]
    pub preset: Preset,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Streams::Fusion)]
    pub streams: Streams,
    #[arg(long, value_parser = positive())]
    pub epochs: Option<usize>,
    #[arg(long, value_parser = positive())]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long, value_parser = positive())]
    pub hidden_optical: Option<usize>,
    #[arg(long, value_parser = positive())]
    pub hidden_radar: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    #[arg(long, value_name = "MANIFEST")]
    pub data: PathBuf,
    #[arg(long, default_value_t = 10, value_parser = positive())]
    pub splits: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Part of each split to score.
    #[arg(long, default_value = "test")]
    pub part: Part,
    /// Directory for report files; the table is always printed.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BaselineArgs {
    #[arg(long, value_name = "MANIFEST")]
    pub data: PathBuf,
    /// S1 (radar), S2 (optical) or S1S2.
    #[arg(long)]
    pub source: Source,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10, value_parser = positive())]
    pub splits: usize,
    /// Selects the tree-count/depth grid.
    #[arg(long, default_value = "desk")]
    pub preset: Preset,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(long, value_name = "MANIFEST")]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10, value_parser = positive())]
    pub splits: usize,
    #[arg(long, default_value = "desk")]
    pub preset: Preset,
    #[arg(long, value_parser = positive())]
    pub epochs: Option<usize>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}
