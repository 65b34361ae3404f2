use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::RngStream;

/// Gini impurity `1 − Σ (n_c / n)²`.
pub fn gini(class_counts: &[usize]) -> Result<f64> {
    let n: usize = class_counts.iter().sum();
    if n == 0 {
        return Err(Error::argument("gini of an empty node"));
    }
    let n = n as f64;
    Ok(1.0 - class_counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    /// Rows with `value <= threshold` go left.
    pub threshold: f64,
    /// Parent Gini minus the size-weighted Gini of the two children.
    pub impurity_decrease: f64,
}

/// Column-major feature storage shared by all trees of a forest.
#[derive(Clone, Debug)]
pub(crate) struct FeatureTable {
    rows: usize,
    columns: Vec<Vec<f64>>,
}

impl FeatureTable {
    pub(crate) fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != width) {
            return Err(Error::shape(
                "feature table",
                format!("{width} features in row 0"),
                format!("{} features in row {i}", r.len()),
            ));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::data("feature rows contain non-finite values"));
        }
        let columns = (0..width).map(|f| rows.iter().map(|r| r[f]).collect()).collect();
        Ok(Self {
            rows: rows.len(),
            columns,
        })
    }

    pub(crate) fn width(&self) -> usize {
        self.columns.len()
    }

    pub(crate) fn len(&self) -> usize {
        self.rows
    }
}

/// Split score `Σ_l n_c² / n_l + Σ_r n_c² / n_r` kept as an exact fraction, so
/// mathematically equal candidates compare equal and tie-breaking is exact.
#[derive(Clone, Copy, Debug)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn new(sq_left: u64, n_left: u64, sq_right: u64, n_right: u64) -> Self {
        Self {
            num: sq_left as u128 * n_right as u128 + sq_right as u128 * n_left as u128,
            den: n_left as u128 * n_right as u128,
        }
    }

    fn cmp(&self, other: &Score) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

fn sum_sq(counts: &[u64]) -> u64 {
    counts.iter().map(|c| c * c).sum()
}

/// Exhaustive best split of `indices` over `features`. Candidate thresholds are
/// midpoints of consecutive distinct values. Ties go to the lowest feature
/// index, then the lowest threshold. `None` when nothing lowers impurity.
pub(crate) fn best_split_indexed(
    table: &FeatureTable,
    labels: &[usize],
    num_classes: usize,
    indices: &[usize],
    features: &[usize],
) -> Option<Split> {
    let n = indices.len();
    if n < 2 {
        return None;
    }
    let mut parent = vec![0u64; num_classes];
    for &i in indices {
        parent[labels[i]] += 1;
    }
    let parent_sq = sum_sq(&parent);
    // splitting must beat the parent's own score Σ n_c² / n
    let parent_score = Score {
        num: parent_sq as u128,
        den: n as u128,
    };

    let mut sorted_features = features.to_vec();
    sorted_features.sort_unstable();
    sorted_features.dedup();

    let mut best: Option<(Score, usize, f64)> = None;
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(n);
    let mut left = vec![0u64; num_classes];
    for &f in &sorted_features {
        let column = &table.columns[f];
        order.clear();
        order.extend(indices.iter().map(|&i| (column[i], labels[i])));
        order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        if order[0].0 == order[n - 1].0 {
            continue;
        }
        left.iter_mut().for_each(|c| *c = 0);
        let mut sq_left = 0u64;
        let mut sq_right = parent_sq;
        for k in 0..n - 1 {
            let c = order[k].1;
            // incremental Σ n_c² updates for moving one row from right to left
            sq_left += 2 * left[c] + 1;
            sq_right -= 2 * (parent[c] - left[c]) - 1;
            left[c] += 1;
            if order[k].0 == order[k + 1].0 {
                continue;
            }
            let score = Score::new(sq_left, (k + 1) as u64, sq_right, (n - k - 1) as u64);
            let (lo, hi) = (order[k].0, order[k + 1].0);
            let mid = 0.5 * (lo + hi);
            // adjacent floats can round the midpoint up onto `hi`
            let threshold = if mid < hi { mid } else { lo };
            let better = match &best {
                None => true,
                Some((b, _, _)) => score.cmp(b) == Ordering::Greater,
            };
            if better {
                best = Some((score, f, threshold));
            }
        }
    }

    let (score, feature, threshold) = best?;
    if score.cmp(&parent_score) != Ordering::Greater {
        return None;
    }
    let nf = n as f64;
    let score_value = score.num as f64 / score.den as f64;
    Some(Split {
        feature,
        threshold,
        impurity_decrease: (score_value - parent_sq as f64 / nf) / nf,
    })
}

/// [`best_split_indexed`] over every row.
pub fn best_split(rows: &[Vec<f64>], labels: &[usize], features: &[usize]) -> Result<Option<Split>> {
    if rows.len() != labels.len() {
        return Err(Error::shape(
            "best_split",
            format!("{} rows", rows.len()),
            format!("{} labels", labels.len()),
        ));
    }
    let table = FeatureTable::new(rows)?;
    if let Some(&f) = features.iter().find(|&&f| f >= table.width()) {
        return Err(Error::argument(format!("feature {f} outside {} columns", table.width())));
    }
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    let indices: Vec<usize> = (0..rows.len()).collect();
    Ok(best_split_indexed(&table, labels, num_classes, &indices, features))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        class_histogram: Vec<u32>,
    },
}

/// CART tree stored as a node arena; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
    num_classes: usize,
}

pub(crate) struct TreeParams {
    pub max_depth: usize,
    pub features_per_split: usize,
}

impl DecisionTree {
    pub(crate) fn fit(
        table: &FeatureTable,
        labels: &[usize],
        num_classes: usize,
        indices: Vec<usize>,
        params: &TreeParams,
        rng: &mut RngStream,
    ) -> Self {
        let mut tree = Self {
            nodes: Vec::new(),
            num_classes,
        };
        tree.grow(table, labels, indices, 0, params, rng);
        tree
    }

    fn grow(
        &mut self,
        table: &FeatureTable,
        labels: &[usize],
        indices: Vec<usize>,
        depth: usize,
        params: &TreeParams,
        rng: &mut RngStream,
    ) -> usize {
        let id = self.nodes.len();
        let mut histogram = vec![0u32; self.num_classes];
        for &i in &indices {
            histogram[labels[i]] += 1;
        }
        let pure = histogram.iter().filter(|&&c| c > 0).count() <= 1;
        let split = if pure || depth >= params.max_depth {
            None
        } else {
            let features = rng.sample_indices(table.width(), params.features_per_split.min(table.width()));
            best_split_indexed(table, labels, self.num_classes, &indices, &features)
        };
        let Some(split) = split else {
            self.nodes.push(TreeNode::Leaf {
                class_histogram: histogram,
            });
            return id;
        };
        self.nodes.push(TreeNode::Leaf {
            class_histogram: Vec::new(),
        });
        let column = &table.columns[split.feature];
        let (l, r): (Vec<usize>, Vec<usize>) = indices.into_iter().partition(|&i| column[i] <= split.threshold);
        let left = self.grow(table, labels, l, depth + 1, params, rng);
        let right = self.grow(table, labels, r, depth + 1, params, rng);
        self.nodes[id] = TreeNode::Internal {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }

    #[cfg(test)]
    pub(crate) fn from_nodes(nodes: Vec<TreeNode>, num_classes: usize) -> Self {
        Self { nodes, num_classes }
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], id: usize) -> usize {
            match &nodes[id] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Internal { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_histogram(&self, row: &[f64]) -> &[u32] {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                TreeNode::Leaf { class_histogram } => return class_histogram,
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Normalised class distribution of the leaf reached by `row`.
    pub fn leaf_distribution(&self, row: &[f64]) -> Vec<f64> {
        let h = self.leaf_histogram(row);
        let n: u32 = h.iter().sum();
        h.iter().map(|&c| c as f64 / n as f64).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gini_values() {
        assert_eq!(gini(&[5, 0]).unwrap(), 0.0);
        assert_eq!(gini(&[4, 4]).unwrap(), 0.5);
        assert!((gini(&[1, 3]).unwrap() - 0.375).abs() < 1e-15);
        assert!(matches!(gini(&[0, 0]), Err(Error::Argument(_))));
    }

    #[test]
    fn single_class_has_no_split() {
        let rows = vec![vec![0.0], vec![1.0], vec![2.0]];
        assert_eq!(best_split(&rows, &[1, 1, 1], &[0]).unwrap(), None);
    }

    #[test]
    fn perfect_one_dimensional_split() {
        let rows = vec![vec![0.0], vec![1.0]];
        let s = best_split(&rows, &[0, 1], &[0]).unwrap().unwrap();
        assert_eq!((s.feature, s.threshold), (0, 0.5));
        assert!((s.impurity_decrease - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ties_prefer_lowest_feature_then_threshold() {
        // both features separate perfectly; feature 0 has two equal options
        let rows = vec![vec![0.0, 5.0], vec![1.0, 6.0], vec![2.0, 7.0]];
        let s = best_split(&rows, &[0, 1, 1], &[1, 0]).unwrap().unwrap();
        assert_eq!((s.feature, s.threshold), (0, 0.5));
        let rows = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let s = best_split(&rows, &[0, 1, 1, 0], &[0]).unwrap().unwrap();
        assert_eq!(s.threshold, 0.5);
    }

    #[test]
    fn constant_features_and_bad_input() {
        let rows = vec![vec![1.0, 2.0], vec![1.0, 2.0]];
        assert_eq!(best_split(&rows, &[0, 1], &[0, 1]).unwrap(), None);
        assert!(best_split(&rows, &[0], &[0]).is_err());
        assert!(best_split(&rows, &[0, 1], &[2]).is_err());
    }

    #[test]
    fn unrestricted_tree_memorises() {
        let mut rng = RngStream::new(4);
        let rows: Vec<Vec<f64>> = (0..60).map(|_| rng.uniform(0.0, 1.0, 3).unwrap()).collect();
        let labels: Vec<usize> = (0..60).map(|i| (i * 7) % 4).collect();
        let table = FeatureTable::new(&rows).unwrap();
        let params = TreeParams {
            max_depth: usize::MAX,
            features_per_split: 3,
        };
        let tree = DecisionTree::fit(&table, &labels, 4, (0..60).collect(), &params, &mut rng);
        for (r, &y) in rows.iter().zip(&labels) {
            assert_eq!(tree.leaf_distribution(r)[y], 1.0);
        }
    }

    #[test]
    fn depth_is_capped() {
        let mut rng = RngStream::new(5);
        let rows: Vec<Vec<f64>> = (0..80).map(|_| rng.uniform(0.0, 1.0, 2).unwrap()).collect();
        let labels: Vec<usize> = (0..80).map(|i| i % 3).collect();
        let table = FeatureTable::new(&rows).unwrap();
        for max_depth in 0..5 {
            let params = TreeParams {
                max_depth,
                features_per_split: 2,
            };
            let tree = DecisionTree::fit(&table, &labels, 3, (0..80).collect(), &params, &mut rng);
            assert!(tree.depth() <= max_depth);
        }
    }
}
