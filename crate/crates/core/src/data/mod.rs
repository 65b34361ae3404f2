//! Object-level SITS datasets: types, file I/O, preprocessing, splitting and a
//! synthetic generator.

mod io;
mod preprocess;
mod split;
mod synth;

pub use io::{load_dataset, save_dataset, DatasetFiles};
pub use preprocess::{compute_ndvi, fill_and_index, gapfill, normalize, prepare, BandScaling, Normalizer};
pub use split::{split, Partition, SplitSpec};
pub use synth::{generate_synthetic, BlindSource, SynthSpec};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Matrix;

pub const NDVI_BAND: &str = "NDVI";
pub const RED_BAND: &str = "B4";
pub const NIR_BAND: &str = "B8";

/// One ground-truth object with its per-date band means.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectSample {
    pub object_id: String,
    pub label: usize,
    /// `T_opt x B_opt`, one row per acquisition date.
    pub optical: Matrix,
    /// `T_rad x B_rad`
    pub radar: Matrix,
    /// `false` marks a cloudy optical acquisition.
    pub optical_valid: Vec<bool>,
}

impl ObjectSample {
    pub fn optical_steps(&self) -> Vec<&[f64]> {
        (0..self.optical.rows()).map(|t| self.optical.row(t)).collect()
    }

    pub fn radar_steps(&self) -> Vec<&[f64]> {
        (0..self.radar.rows()).map(|t| self.radar.row(t)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SitsDataset {
    pub name: String,
    pub class_names: Vec<String>,
    pub optical_bands: Vec<String>,
    pub radar_bands: Vec<String>,
    pub optical_dates: Vec<NaiveDate>,
    pub radar_dates: Vec<NaiveDate>,
    pub samples: Vec<ObjectSample>,
}

/// Dimensions shared by every sample of a dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetShape {
    pub optical_steps: usize,
    pub optical_bands: usize,
    pub radar_steps: usize,
    pub radar_bands: usize,
    pub num_classes: usize,
}

impl DatasetShape {
    /// Length of the flattened per-object feature vector over both sources.
    pub fn num_features(&self) -> usize {
        self.optical_steps * self.optical_bands + self.radar_steps * self.radar_bands
    }
}

impl SitsDataset {
    pub fn shape(&self) -> DatasetShape {
        DatasetShape {
            optical_steps: self.optical_dates.len(),
            optical_bands: self.optical_bands.len(),
            radar_steps: self.radar_dates.len(),
            radar_bands: self.radar_bands.len(),
            num_classes: self.class_names.len(),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn band_index(bands: &[String], name: &str) -> Option<usize> {
        bands.iter().position(|b| b.eq_ignore_ascii_case(name))
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    /// Clones the samples at `indices`, in order.
    pub fn subset(&self, indices: &[usize]) -> Vec<ObjectSample> {
        indices.iter().map(|&i| self.samples[i].clone()).collect()
    }

    /// Checks every structural invariant: shared dimensions, label range,
    /// strictly increasing dates, finite valid entries.
    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::data("dataset contains no samples"));
        }
        if self.class_names.is_empty() {
            return Err(Error::data("dataset declares no classes"));
        }
        if self.optical_bands.is_empty() || self.radar_bands.is_empty() {
            return Err(Error::data("both sources need at least one band"));
        }
        if self.optical_dates.is_empty() || self.radar_dates.is_empty() {
            return Err(Error::data("both sources need at least one acquisition date"));
        }
        for (what, dates) in [("optical", &self.optical_dates), ("radar", &self.radar_dates)] {
            if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
                return Err(Error::data(format!(
                    "{what} dates must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        let shape = self.shape();
        for s in &self.samples {
            let id = &s.object_id;
            if s.label >= shape.num_classes {
                return Err(Error::data(format!(
                    "object {id}: label {} outside {} classes",
                    s.label, shape.num_classes
                )));
            }
            if s.optical.shape() != (shape.optical_steps, shape.optical_bands) {
                return Err(Error::data(format!(
                    "object {id}: optical series is {:?}, expected {:?}",
                    s.optical.shape(),
                    (shape.optical_steps, shape.optical_bands)
                )));
            }
            if s.radar.shape() != (shape.radar_steps, shape.radar_bands) {
                return Err(Error::data(format!(
                    "object {id}: radar series is {:?}, expected {:?}",
                    s.radar.shape(),
                    (shape.radar_steps, shape.radar_bands)
                )));
            }
            if s.optical_valid.len() != shape.optical_steps {
                return Err(Error::data(format!(
                    "object {id}: {} validity flags for {} optical dates",
                    s.optical_valid.len(),
                    shape.optical_steps
                )));
            }
            for t in 0..shape.optical_steps {
                if s.optical_valid[t] && s.optical.row(t).iter().any(|v| !v.is_finite()) {
                    return Err(Error::data(format!(
                        "object {id}: non-finite optical value at valid date {t}"
                    )));
                }
            }
            if !s.radar.is_finite() {
                return Err(Error::data(format!("object {id}: non-finite radar value")));
            }
        }
        Ok(())
    }
}

/// Day offsets of `dates` from the first date.
pub(crate) fn day_offsets(dates: &[NaiveDate]) -> Vec<f64> {
    let first = dates[0];
    dates
        .iter()
        .map(|d| (*d - first).num_days() as f64)
        .collect()
}
