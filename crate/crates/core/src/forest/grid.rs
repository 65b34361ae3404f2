use serde::{Deserialize, Serialize};

use super::tree::FeatureTable;
use super::{ForestConfig, RandomForest};
use crate::error::{Error, Result};

/// Tree counts and depths to try, each listed in ascending order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestGrid {
    pub trees: Vec<usize>,
    pub depths: Vec<usize>,
}

impl ForestGrid {
    /// {100, …, 500} trees × {20, …, 100} depth.
    pub fn paper() -> Self {
        Self {
            trees: vec![100, 200, 300, 400, 500],
            depths: vec![20, 40, 60, 80, 100],
        }
    }

    /// {50, 100} trees × {10, 20} depth.
    pub fn desk() -> Self {
        Self {
            trees: vec![50, 100],
            depths: vec![10, 20],
        }
    }

    pub fn single(trees: usize, depth: usize) -> Self {
        Self {
            trees: vec![trees],
            depths: vec![depth],
        }
    }

    fn normalized(&self) -> Result<Self> {
        let mut trees = self.trees.clone();
        let mut depths = self.depths.clone();
        trees.sort_unstable();
        trees.dedup();
        depths.sort_unstable();
        depths.dedup();
        if trees.first().map_or(true, |&t| t == 0) || depths.first().map_or(true, |&d| d == 0) {
            return Err(Error::argument("forest grid needs nonempty positive tree counts and depths"));
        }
        Ok(Self { trees, depths })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub num_trees: usize,
    pub max_depth: usize,
    pub validation_accuracy: f64,
}

#[derive(Clone, Debug)]
pub struct GridResult {
    pub best: ForestConfig,
    pub forest: RandomForest,
    pub cells: Vec<GridCell>,
}

/// Scores every grid cell on validation accuracy and returns the winner fitted
/// on `train` only. Ties go to fewer trees, then shallower depth.
///
/// One forest with the largest tree count is grown per depth; smaller counts
/// are scored on its leading trees, which equal a separate fit with the same
/// seed.
pub fn grid_search(
    train: (&[Vec<f64>], &[usize]),
    validation: (&[Vec<f64>], &[usize]),
    num_classes: usize,
    grid: &ForestGrid,
    seed: u64,
) -> Result<GridResult> {
    let (train_rows, train_labels) = train;
    let (val_rows, val_labels) = validation;
    if train_rows.is_empty() || val_rows.is_empty() {
        return Err(Error::argument(format!(
            "grid search needs nonempty train and validation parts (got {} and {})",
            train_rows.len(),
            val_rows.len()
        )));
    }
    for (rows, labels) in [(train_rows, train_labels), (val_rows, val_labels)] {
        if rows.len() != labels.len() {
            return Err(Error::shape(
                "grid_search",
                format!("{} rows", rows.len()),
                format!("{} labels", labels.len()),
            ));
        }
    }
    if let Some(&y) = train_labels.iter().find(|&&y| y >= num_classes) {
        return Err(Error::argument(format!("label {y} outside {num_classes} classes")));
    }
    let grid = grid.normalized()?;
    let max_trees = *grid.trees.last().expect("normalized grid is nonempty");
    let table = FeatureTable::new(train_rows)?;

    let mut cells = Vec::new();
    let mut forests = Vec::new();
    for &depth in &grid.depths {
        let mut forest = RandomForest::new(ForestConfig::new(max_trees, depth, seed), num_classes);
        forest.fit_table(&table, train_labels);
        for &trees in &grid.trees {
            let mut correct = 0usize;
            for (row, &y) in val_rows.iter().zip(val_labels) {
                if forest.predict_prefix(row, trees)?.class == y {
                    correct += 1;
                }
            }
            cells.push(GridCell {
                num_trees: trees,
                max_depth: depth,
                validation_accuracy: correct as f64 / val_rows.len() as f64,
            });
        }
        forests.push(forest);
    }

    // scan in (trees, depth) ascending order so strict improvement keeps the
    // preferred cell on ties
    let mut ranked: Vec<&GridCell> = cells.iter().collect();
    ranked.sort_by_key(|c| (c.num_trees, c.max_depth));
    let mut winner = ranked[0];
    for cell in &ranked[1..] {
        if cell.validation_accuracy > winner.validation_accuracy {
            winner = cell;
        }
    }
    let depth_index = grid.depths.iter().position(|&d| d == winner.max_depth).expect("winner depth is in the grid");
    let forest = forests[depth_index].truncated(winner.num_trees)?;
    Ok(GridResult {
        best: forest.config().clone(),
        forest,
        cells,
    })
}
