//! Random Forest baseline over flattened per-object time series.

mod grid;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use grid::{grid_search, ForestGrid, GridCell, GridResult};
pub use tree::{best_split, gini, DecisionTree, Split, TreeNode};

use crate::data::ObjectSample;
use crate::error::{Error, Result};
use crate::model::argmax;
use crate::numeric::RngStream;
use tree::{FeatureTable, TreeParams};

/// Which sensor's values a feature vector is built from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    /// Radar only.
    S1,
    /// Optical only.
    S2,
    /// Optical then radar.
    S1S2,
}

impl Source {
    pub const ALL: [Source; 3] = [Source::S1, Source::S2, Source::S1S2];

    /// Row label used in comparison tables, e.g. `RF(S1,S2)`.
    pub fn method_name(self) -> &'static str {
        match self {
            Source::S1 => "RF(S1)",
            Source::S2 => "RF(S2)",
            Source::S1S2 => "RF(S1,S2)",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::S1 => "S1",
            Source::S2 => "S2",
            Source::S1S2 => "S1S2",
        })
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace([',', '+'], "").as_str() {
            "S1" => Ok(Source::S1),
            "S2" => Ok(Source::S2),
            "S1S2" => Ok(Source::S1S2),
            _ => Err(Error::argument(format!("unknown source {s:?} (expected S1, S2 or S1S2)"))),
        }
    }
}

/// Date-major concatenation of the selected series: all bands of the first
/// date, then the next date, and so on.
pub fn flatten_features(sample: &ObjectSample, source: Source) -> Vec<f64> {
    match source {
        Source::S1 => sample.radar.as_slice().to_vec(),
        Source::S2 => sample.optical.as_slice().to_vec(),
        Source::S1S2 => [sample.optical.as_slice(), sample.radar.as_slice()].concat(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub num_trees: usize,
    pub max_depth: usize,
    /// Features drawn per node; `None` means `⌈√d⌉`.
    pub features_per_split: Option<usize>,
    /// Fit each tree on a with-replacement resample of the rows (otherwise on
    /// the rows themselves).
    pub bootstrap: bool,
    pub seed: u64,
}

impl ForestConfig {
    pub fn new(num_trees: usize, max_depth: usize, seed: u64) -> Self {
        Self {
            num_trees,
            max_depth,
            features_per_split: None,
            bootstrap: true,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_trees == 0 || self.max_depth == 0 || self.features_per_split == Some(0) {
            return Err(Error::argument(format!(
                "forest counts must be at least 1 (trees {}, depth {}, features {:?})",
                self.num_trees, self.max_depth, self.features_per_split
            )));
        }
        Ok(())
    }

    pub fn resolved_features(&self, num_features: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (num_features as f64).sqrt().ceil() as usize)
            .clamp(1, num_features.max(1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestPrediction {
    pub class: usize,
    pub probs: Vec<f64>,
}

/// Bagged CART trees. Tree `t` draws its bootstrap sample and feature subsets
/// from `substream("rf-tree", t)` of the forest seed, so a forest of `k` trees
/// is exactly the first `k` trees of any larger forest with the same seed and
/// depth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    config: ForestConfig,
    num_classes: usize,
    num_features: usize,
    trees: Vec<DecisionTree>,
}

impl RandomForest {
    /// An unfitted forest; prediction fails until [`RandomForest::fit`] runs.
    pub fn new(config: ForestConfig, num_classes: usize) -> Self {
        Self {
            config,
            num_classes,
            num_features: 0,
            trees: Vec::new(),
        }
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn is_fitted(&self) -> bool {
        !self.trees.is_empty()
    }

    pub fn fit(&mut self, rows: &[Vec<f64>], labels: &[usize]) -> Result<()> {
        self.config.validate()?;
        if rows.is_empty() {
            return Err(Error::argument("cannot fit a forest on zero rows"));
        }
        if rows.len() != labels.len() {
            return Err(Error::shape(
                "fit_forest",
                format!("{} rows", rows.len()),
                format!("{} labels", labels.len()),
            ));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= self.num_classes) {
            return Err(Error::argument(format!("label {y} outside {} classes", self.num_classes)));
        }
        let table = FeatureTable::new(rows)?;
        self.fit_table(&table, labels);
        Ok(())
    }

    pub(super) fn fit_table(&mut self, table: &FeatureTable, labels: &[usize]) {
        let params = TreeParams {
            max_depth: self.config.max_depth,
            features_per_split: self.config.resolved_features(table.width()),
        };
        let root = RngStream::new(self.config.seed);
        let n = table.len();
        self.num_features = table.width();
        self.trees = (0..self.config.num_trees)
            .map(|t| {
                let mut rng = root.substream("rf-tree", t as u64);
                let rows: Vec<usize> = if self.config.bootstrap {
                    (0..n).map(|_| rng.below(n)).collect()
                } else {
                    (0..n).collect()
                };
                DecisionTree::fit(table, labels, self.num_classes, rows, &params, &mut rng)
            })
            .collect();
    }

    /// The first `num_trees` trees as a forest of their own.
    pub fn truncated(&self, num_trees: usize) -> Result<RandomForest> {
        if num_trees == 0 || num_trees > self.trees.len() {
            return Err(Error::argument(format!(
                "cannot keep {num_trees} of {} trees",
                self.trees.len()
            )));
        }
        Ok(RandomForest {
            config: ForestConfig {
                num_trees,
                ..self.config.clone()
            },
            num_classes: self.num_classes,
            num_features: self.num_features,
            trees: self.trees[..num_trees].to_vec(),
        })
    }

    fn check_row(&self, row: &[f64]) -> Result<()> {
        if !self.is_fitted() {
            return Err(Error::state("forest used before fit"));
        }
        if row.len() != self.num_features {
            return Err(Error::shape(
                "predict_forest",
                format!("{} fitted features", self.num_features),
                format!("row of {}", row.len()),
            ));
        }
        Ok(())
    }

    /// Mean of the per-tree leaf distributions; ties go to the lowest class.
    pub fn predict(&self, row: &[f64]) -> Result<ForestPrediction> {
        self.predict_prefix(row, self.trees.len())
    }

    pub(crate) fn predict_prefix(&self, row: &[f64], num_trees: usize) -> Result<ForestPrediction> {
        self.check_row(row)?;
        let mut probs = vec![0.0; self.num_classes];
        for tree in &self.trees[..num_trees] {
            let h = tree.leaf_histogram(row);
            let n: u32 = h.iter().sum();
            for (p, &c) in probs.iter_mut().zip(h) {
                *p += c as f64 / n as f64;
            }
        }
        probs.iter_mut().for_each(|p| *p /= num_trees as f64);
        Ok(ForestPrediction {
            class: argmax(&probs),
            probs,
        })
    }
}

pub fn fit_forest(rows: &[Vec<f64>], labels: &[usize], num_classes: usize, config: ForestConfig) -> Result<RandomForest> {
    let mut forest = RandomForest::new(config, num_classes);
    forest.fit(rows, labels)?;
    Ok(forest)
}
