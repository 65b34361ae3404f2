use serde::{Deserialize, Serialize};

use super::{day_offsets, SitsDataset, NDVI_BAND, NIR_BAND, RED_BAND};
use crate::error::{Error, Result};
use crate::numeric::Matrix;

/// Replaces invalid entries by linear interpolation in date coordinates
/// between the nearest valid neighbours. Leading and trailing gaps copy the
/// nearest valid value. Valid entries are returned untouched.
pub fn gapfill(series: &[f64], valid: &[bool], days: &[f64]) -> Result<Vec<f64>> {
    if series.len() != valid.len() || series.len() != days.len() {
        return Err(Error::shape(
            "gapfill",
            format!("series of length {}", series.len()),
            format!("{} flags and {} dates", valid.len(), days.len()),
        ));
    }
    let valid_idx: Vec<usize> = (0..series.len()).filter(|&i| valid[i]).collect();
    let (Some(&first), Some(&last)) = (valid_idx.first(), valid_idx.last()) else {
        return Err(Error::data("cannot gap-fill a series without valid observations"));
    };

    let mut out = series.to_vec();
    out[..first].fill(series[first]);
    out[last + 1..].fill(series[last]);
    for pair in valid_idx.windows(2) {
        let (p, n) = (pair[0], pair[1]);
        let (vp, vn) = (series[p], series[n]);
        let span = days[n] - days[p];
        for i in p + 1..n {
            // multiply before dividing so integer-valued lines stay exact
            out[i] = vp + ((vn - vp) * (days[i] - days[p])) / span;
        }
    }
    Ok(out)
}

/// `(nir - red) / (nir + red)`, defined as 0 where both are 0.
pub fn compute_ndvi(red: &[f64], nir: &[f64]) -> Result<Vec<f64>> {
    if red.len() != nir.len() {
        return Err(Error::shape(
            "compute_ndvi",
            format!("red band of length {}", red.len()),
            format!("nir band of length {}", nir.len()),
        ));
    }
    red.iter()
        .zip(nir)
        .map(|(&r, &n)| {
            if !(r >= 0.0 && n >= 0.0) {
                return Err(Error::data(format!(
                    "NDVI needs nonnegative reflectances, got red={r}, nir={n}"
                )));
            }
            let sum = n + r;
            Ok(if sum == 0.0 { 0.0 } else { (n - r) / sum })
        })
        .collect()
}

/// Min-max constants of one band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandScaling {
    pub min: f64,
    pub max: f64,
}

impl BandScaling {
    pub fn apply(&self, v: f64) -> f64 {
        if self.max > self.min {
            (v - self.min) / (self.max - self.min)
        } else {
            0.0
        }
    }
}

/// Per-band scaling constants for both sources, fitted over every sample and
/// timestamp jointly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub optical: Vec<BandScaling>,
    pub radar: Vec<BandScaling>,
}

fn fit_bands<'a>(series: impl Iterator<Item = &'a Matrix>, bands: usize, source: &str) -> Result<Vec<BandScaling>> {
    let mut scaling = vec![
        BandScaling {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        };
        bands
    ];
    for m in series {
        for t in 0..m.rows() {
            for (b, &v) in m.row(t).iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::data(format!(
                        "non-finite {source} value in band {b} at date {t}"
                    )));
                }
                scaling[b].min = scaling[b].min.min(v);
                scaling[b].max = scaling[b].max.max(v);
            }
        }
    }
    Ok(scaling)
}

fn scale_matrix(m: &Matrix, scaling: &[BandScaling]) -> Result<Matrix> {
    if m.cols() != scaling.len() {
        return Err(Error::shape(
            "normalize",
            format!("{} scaling constants", scaling.len()),
            format!("series with {} bands", m.cols()),
        ));
    }
    let mut out = m.clone();
    for t in 0..out.rows() {
        for (v, s) in out.row_mut(t).iter_mut().zip(scaling) {
            if !v.is_finite() {
                return Err(Error::data("non-finite value during normalisation"));
            }
            *v = s.apply(*v);
        }
    }
    Ok(out)
}

impl Normalizer {
    pub fn fit(dataset: &SitsDataset) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::data("cannot fit normalisation on an empty dataset"));
        }
        Ok(Self {
            optical: fit_bands(dataset.samples.iter().map(|s| &s.optical), dataset.optical_bands.len(), "optical")?,
            radar: fit_bands(dataset.samples.iter().map(|s| &s.radar), dataset.radar_bands.len(), "radar")?,
        })
    }

    pub fn apply(&self, dataset: &SitsDataset) -> Result<SitsDataset> {
        let mut out = dataset.clone();
        for s in &mut out.samples {
            s.optical = scale_matrix(&s.optical, &self.optical)?;
            s.radar = scale_matrix(&s.radar, &self.radar)?;
        }
        Ok(out)
    }
}

/// Per-band min-max scaling to `[0, 1]`; constant bands map to 0.
pub fn normalize(dataset: &SitsDataset) -> Result<(SitsDataset, Normalizer)> {
    let normalizer = Normalizer::fit(dataset)?;
    let out = normalizer.apply(dataset)?;
    Ok((out, normalizer))
}

/// Gap-fills every optical band, (re)computes NDVI from the filled red and
/// near-infrared bands, then normalises both sources.
pub fn prepare(dataset: &SitsDataset) -> Result<(SitsDataset, Normalizer)> {
    normalize(&fill_and_index(dataset)?)
}

/// The unnormalised part of [`prepare`]: gap-filling plus NDVI.
///
/// If the dataset has no NDVI band one is appended. Validity flags are kept
/// as a record of which dates were filled.
pub fn fill_and_index(dataset: &SitsDataset) -> Result<SitsDataset> {
    dataset.validate()?;
    let days = day_offsets(&dataset.optical_dates);
    let red = SitsDataset::band_index(&dataset.optical_bands, RED_BAND);
    let nir = SitsDataset::band_index(&dataset.optical_bands, NIR_BAND);
    let ndvi = SitsDataset::band_index(&dataset.optical_bands, NDVI_BAND);

    let mut filled = dataset.clone();
    let append_ndvi = ndvi.is_none() && red.is_some() && nir.is_some();
    if append_ndvi {
        filled.optical_bands.push(NDVI_BAND.to_string());
    }
    for sample in &mut filled.samples {
        let bands = dataset.optical_bands.len();
        let mut columns: Vec<Vec<f64>> = (0..bands)
            .map(|b| gapfill(&sample.optical.col(b), &sample.optical_valid, &days))
            .collect::<Result<_>>()
            .map_err(|e| Error::data(format!("object {}: {e}", sample.object_id)))?;
        if let (Some(r), Some(n)) = (red, nir) {
            let index = compute_ndvi(&columns[r], &columns[n])
                .map_err(|e| Error::data(format!("object {}: {e}", sample.object_id)))?;
            match ndvi {
                Some(i) => columns[i] = index,
                None => columns.push(index),
            }
        }
        let steps = sample.optical.rows();
        let mut optical = Matrix::zeros(steps, columns.len());
        for (b, col) in columns.iter().enumerate() {
            for (t, &v) in col.iter().enumerate() {
                optical.set(t, b, v);
            }
        }
        sample.optical = optical;
    }
    Ok(filled)
}
