use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SitsDataset;
use crate::error::{Error, Result};
use crate::numeric::RngStream;

/// Train/validation/test proportions, seed and number of repeated splits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
    pub seed: u64,
    pub repeats: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.5,
            validation: 0.2,
            test: 0.3,
            seed: 0,
            repeats: 10,
        }
    }
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fractions = [self.train, self.validation, self.test];
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::argument(format!("split fractions must lie in [0, 1], got {fractions:?}")));
        }
        if (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::argument(format!("split fractions must sum to 1, got {fractions:?}")));
        }
        if self.repeats == 0 {
            return Err(Error::argument("at least one split repeat is required"));
        }
        Ok(())
    }
}

/// Sample indices of the three parts, each sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl Partition {
    /// Short hex digest identifying the partition, used to audit that several
    /// methods saw identical splits.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (tag, part) in [(b'T', &self.train), (b'V', &self.validation), (b'E', &self.test)] {
            h.update([tag]);
            for &i in part {
                h.update((i as u64).to_le_bytes());
            }
        }
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Stratified split: inside every class the samples are shuffled with a stream
/// keyed by `(seed, repeat_index)` and cut at the requested fractions, with
/// rounding leftovers going to the training part.
pub fn split(dataset: &SitsDataset, spec: &SplitSpec, repeat_index: usize) -> Result<Partition> {
    spec.validate()?;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.num_classes()];
    for (i, s) in dataset.samples.iter().enumerate() {
        by_class
            .get_mut(s.label)
            .ok_or_else(|| Error::data(format!("label {} outside class list", s.label)))?
            .push(i);
    }
    if let Some((c, members)) = by_class.iter().enumerate().find(|(_, m)| m.len() < 3) {
        return Err(Error::data(format!(
            "class {c} ({}) has {} samples; stratified splitting needs at least 3",
            dataset.class_names[c],
            members.len()
        )));
    }

    let mut rng = RngStream::new(spec.seed).substream("split", repeat_index as u64);
    let mut partition = Partition {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for mut members in by_class {
        rng.shuffle(&mut members);
        let n = members.len();
        let mut n_val = ((spec.validation * n as f64).round() as usize).max(1);
        let mut n_test = ((spec.test * n as f64).round() as usize).max(1);
        while n_val + n_test > n - 1 {
            if n_test >= n_val {
                n_test -= 1;
            } else {
                n_val -= 1;
            }
        }
        partition.validation.extend_from_slice(&members[..n_val]);
        partition.test.extend_from_slice(&members[n_val..n_val + n_test]);
        partition.train.extend_from_slice(&members[n_val + n_test..]);
    }
    partition.train.sort_unstable();
    partition.validation.sort_unstable();
    partition.test.sort_unstable();
    Ok(partition)
}
