//! Synthetic object-level SITS with a controlled information split between
//! the two sources.
//!
//! Every class owns an optical "profile key" and a radar profile key. Distinct
//! keys give distinct phenology-like curves (a seasonal sinusoid around a
//! per-band base level). Confusable pairs share a key on one source:
//! even-numbered pairs are optical-blind (same optical key, different radar
//! key) and odd-numbered pairs are radar-blind. A model restricted to the blind
//! source cannot tell the two classes of such a pair apart.

use std::f64::consts::TAU;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use super::{ObjectSample, SitsDataset};
use crate::error::{Error, Result};
use crate::numeric::{Matrix, RngStream};

pub const SYNTH_OPTICAL_BANDS: [&str; 4] = ["B2", "B3", "B4", "B8"];
pub const SYNTH_RADAR_BANDS: [&str; 2] = ["VV", "VH"];

/// Reflectance reported for cloud-covered acquisitions (before gap-filling).
const CLOUD_LEVEL: f64 = 0.55;
/// Radar speckle is noisier than optical noise by this factor.
const RADAR_NOISE_FACTOR: f64 = 2.5;
const SEASON_DAYS: i64 = 395;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub num_classes: usize,
    pub samples_per_class: usize,
    pub optical_steps: usize,
    pub radar_steps: usize,
    pub noise_sigma: f64,
    pub cloud_rate: f64,
    pub confusable_pairs: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            num_classes: 8,
            samples_per_class: 75,
            optical_steps: 20,
            radar_steps: 12,
            noise_sigma: 0.05,
            cloud_rate: 0.2,
            confusable_pairs: 2,
        }
    }
}

/// Which source a class pair is indistinguishable on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlindSource {
    Optical,
    Radar,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::argument("synthetic data needs at least 2 classes"));
        }
        if self.samples_per_class == 0 || self.optical_steps == 0 || self.radar_steps == 0 {
            return Err(Error::argument(
                "samples per class and timestep counts must be positive",
            ));
        }
        if 2 * self.confusable_pairs > self.num_classes {
            return Err(Error::argument(format!(
                "{} confusable pairs need {} classes, only {} configured",
                self.confusable_pairs,
                2 * self.confusable_pairs,
                self.num_classes
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::argument("noise sigma must be finite and nonnegative"));
        }
        if !(0.0..1.0).contains(&self.cloud_rate) {
            return Err(Error::argument("cloud rate must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Class pairs `(2k, 2k + 1)` and the source each pair is blind on.
    pub fn confusable(&self) -> Vec<((usize, usize), BlindSource)> {
        (0..self.confusable_pairs)
            .map(|k| {
                let blind = if k % 2 == 0 {
                    BlindSource::Optical
                } else {
                    BlindSource::Radar
                };
                ((2 * k, 2 * k + 1), blind)
            })
            .collect()
    }

    /// Classes that a model seeing only `source` cannot separate.
    pub fn blind_classes(&self, source: BlindSource) -> Vec<usize> {
        self.confusable()
            .into_iter()
            .filter(|(_, b)| *b == source)
            .flat_map(|((a, b), _)| [a, b])
            .collect()
    }

    fn profile_keys(&self, source: BlindSource) -> Vec<usize> {
        let mut keys: Vec<usize> = (0..self.num_classes).collect();
        for ((a, b), blind) in self.confusable() {
            if blind == source {
                keys[b] = keys[a];
            }
        }
        keys
    }
}

#[derive(Clone, Debug)]
struct Profile {
    base: Vec<f64>,
    amplitude: Vec<f64>,
    phase: f64,
}

impl Profile {
    fn value(&self, band: usize, season_fraction: f64) -> f64 {
        self.base[band] + self.amplitude[band] * (TAU * season_fraction + self.phase).sin()
    }
}

/// Per-key profiles. Band 0 base levels are evenly spread so that distinct
/// keys always differ in their temporal mean.
fn profiles(keys: usize, bands: usize, lo: f64, hi: f64, rng: &mut RngStream) -> Vec<Profile> {
    let mut order: Vec<usize> = (0..keys).collect();
    rng.shuffle(&mut order);
    (0..keys)
        .map(|k| {
            let base = (0..bands)
                .map(|b| {
                    if b == 0 {
                        lo + (hi - lo) * (order[k] as f64 + 0.5) / keys as f64
                    } else {
                        rng.uniform_unchecked(lo, hi)
                    }
                })
                .collect();
            let amplitude = (0..bands).map(|_| rng.uniform_unchecked(0.04, 0.12)).collect();
            let phase = TAU * k as f64 / keys as f64 + rng.uniform_unchecked(-0.3, 0.3);
            Profile {
                base,
                amplitude,
                phase,
            }
        })
        .collect()
}

fn dates(start: NaiveDate, steps: usize) -> Vec<NaiveDate> {
    let stride = if steps > 1 {
        (SEASON_DAYS / (steps as i64 - 1)).max(1)
    } else {
        1
    };
    (0..steps as i64).map(|i| start + Duration::days(i * stride)).collect()
}

pub fn generate_synthetic(spec: &SynthSpec, rng: &mut RngStream) -> Result<SitsDataset> {
    spec.validate()?;
    let optical_keys = spec.profile_keys(BlindSource::Optical);
    let radar_keys = spec.profile_keys(BlindSource::Radar);

    let mut profile_rng = rng.substream("synth-profiles", 0);
    let optical_profiles = profiles(spec.num_classes, SYNTH_OPTICAL_BANDS.len(), 0.05, 0.45, &mut profile_rng);
    let radar_profiles = profiles(spec.num_classes, SYNTH_RADAR_BANDS.len(), 0.2, 0.8, &mut profile_rng);

    let start = NaiveDate::from_ymd_opt(2016, 4, 1).expect("valid date");
    let optical_dates = dates(start, spec.optical_steps);
    let radar_dates = dates(start + Duration::days(2), spec.radar_steps);
    let season = |d: &NaiveDate| (*d - start).num_days() as f64 / SEASON_DAYS as f64;

    let mut noise_rng = rng.substream("synth-samples", 0);
    let sigma = spec.noise_sigma;
    let mut samples = Vec::with_capacity(spec.num_classes * spec.samples_per_class);
    for class in 0..spec.num_classes {
        let opt = &optical_profiles[optical_keys[class]];
        let rad = &radar_profiles[radar_keys[class]];
        for _ in 0..spec.samples_per_class {
            let mut optical = Matrix::zeros(spec.optical_steps, SYNTH_OPTICAL_BANDS.len());
            let mut valid = vec![true; spec.optical_steps];
            for (t, d) in optical_dates.iter().enumerate() {
                let cloudy = noise_rng.bernoulli(spec.cloud_rate);
                valid[t] = !cloudy;
                for b in 0..SYNTH_OPTICAL_BANDS.len() {
                    let clean = if cloudy { CLOUD_LEVEL } else { opt.value(b, season(d)) };
                    let v = clean + sigma * noise_rng.normal();
                    optical.set(t, b, v.max(0.0));
                }
            }
            if valid.iter().all(|v| !v) {
                let t = noise_rng.below(spec.optical_steps);
                valid[t] = true;
                for b in 0..SYNTH_OPTICAL_BANDS.len() {
                    let v = opt.value(b, season(&optical_dates[t])) + sigma * noise_rng.normal();
                    optical.set(t, b, v.max(0.0));
                }
            }
            let mut radar = Matrix::zeros(spec.radar_steps, SYNTH_RADAR_BANDS.len());
            for (t, d) in radar_dates.iter().enumerate() {
                for b in 0..SYNTH_RADAR_BANDS.len() {
                    let v = rad.value(b, season(d)) + RADAR_NOISE_FACTOR * sigma * noise_rng.normal();
                    radar.set(t, b, v);
                }
            }
            samples.push(ObjectSample {
                object_id: format!("obj{:05}", samples.len()),
                label: class,
                optical,
                radar,
                optical_valid: valid,
            });
        }
    }

    Ok(SitsDataset {
        name: "synthetic".into(),
        class_names: (0..spec.num_classes).map(|c| format!("class_{c}")).collect(),
        optical_bands: SYNTH_OPTICAL_BANDS.iter().map(|s| s.to_string()).collect(),
        radar_bands: SYNTH_RADAR_BANDS.iter().map(|s| s.to_string()).collect(),
        optical_dates,
        radar_dates,
        samples,
    })
}
