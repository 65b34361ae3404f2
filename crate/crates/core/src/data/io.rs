//! Dataset files: a TOML manifest plus one wide CSV table.
//!
//! Table columns are fixed: `object_id`, `label`, then the optical values
//! date-major (`opt_<t>_<band>`), then the radar values date-major
//! (`rad_<t>_<band>`), then one validity flag per optical date (`valid_<t>`).

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ObjectSample, SitsDataset};
use crate::error::{Error, Result};
use crate::numeric::Matrix;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    name: String,
    /// Table path, relative to the manifest.
    table: String,
    class_names: Vec<String>,
    optical_bands: Vec<String>,
    radar_bands: Vec<String>,
    optical_dates: Vec<String>,
    radar_dates: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetFiles {
    pub manifest: PathBuf,
    pub table: PathBuf,
}

impl DatasetFiles {
    /// Resolves the table referenced by an existing manifest.
    pub fn locate(manifest_path: &Path) -> Result<Self> {
        let manifest = read_manifest(manifest_path)?;
        Ok(Self {
            manifest: manifest_path.to_path_buf(),
            table: manifest_path.with_file_name(&manifest.table),
        })
    }

    /// SHA-256 over the manifest bytes followed by the table bytes.
    pub fn digest(&self) -> Result<String> {
        let mut h = Sha256::new();
        for p in [&self.manifest, &self.table] {
            h.update(fs::read(p).map_err(|e| Error::io(p, e))?);
        }
        Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }
}

fn header(ds: &SitsDataset) -> Vec<String> {
    let mut cols = vec!["object_id".to_string(), "label".to_string()];
    for t in 0..ds.optical_dates.len() {
        cols.extend(ds.optical_bands.iter().map(|b| format!("opt_{t}_{b}")));
    }
    for t in 0..ds.radar_dates.len() {
        cols.extend(ds.radar_bands.iter().map(|b| format!("rad_{t}_{b}")));
    }
    cols.extend((0..ds.optical_dates.len()).map(|t| format!("valid_{t}")));
    cols
}

/// Writes `manifest_path` and a `<stem>.csv` table beside it.
pub fn save_dataset(ds: &SitsDataset, manifest_path: &Path) -> Result<DatasetFiles> {
    ds.validate()?;
    let stem = manifest_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset");
    let table_name = format!("{stem}.csv");
    let table = manifest_path.with_file_name(&table_name);
    let manifest = Manifest {
        name: ds.name.clone(),
        table: table_name,
        class_names: ds.class_names.clone(),
        optical_bands: ds.optical_bands.clone(),
        radar_bands: ds.radar_bands.clone(),
        optical_dates: ds.optical_dates.iter().map(|d| d.to_string()).collect(),
        radar_dates: ds.radar_dates.iter().map(|d| d.to_string()).collect(),
    };
    let text = toml::to_string(&manifest).expect("manifest serialises");
    fs::write(manifest_path, text).map_err(|e| Error::io(manifest_path, e))?;

    let mut w = csv::Writer::from_path(&table).map_err(|e| csv_io(&table, e))?;
    w.write_record(header(ds)).map_err(|e| csv_io(&table, e))?;
    for s in &ds.samples {
        let mut rec = vec![s.object_id.clone(), s.label.to_string()];
        rec.extend(s.optical.as_slice().iter().map(|v| v.to_string()));
        rec.extend(s.radar.as_slice().iter().map(|v| v.to_string()));
        rec.extend(s.optical_valid.iter().map(|&v| if v { "1" } else { "0" }.to_string()));
        w.write_record(&rec).map_err(|e| csv_io(&table, e))?;
    }
    w.flush().map_err(|e| Error::io(&table, e))?;
    Ok(DatasetFiles {
        manifest: manifest_path.to_path_buf(),
        table,
    })
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, 0, "", format!("{other:?}")),
    }
}

fn parse_dates(path: &Path, field: &str, raw: &[String]) -> Result<Vec<NaiveDate>> {
    raw.iter()
        .enumerate()
        .map(|(i, d)| {
            NaiveDate::parse_from_str(d, "%Y-%m-%d")
                .map_err(|e| Error::format(path, 0, format!("{field}[{i}]"), format!("bad ISO date {d:?}: {e}")))
        })
        .collect()
}

fn read_manifest(manifest_path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    toml::from_str(&text).map_err(|e| Error::format(manifest_path, 0, "manifest", e.message().to_string()))
}

pub fn load_dataset(manifest_path: &Path) -> Result<SitsDataset> {
    let manifest = read_manifest(manifest_path)?;
    let optical_dates = parse_dates(manifest_path, "optical_dates", &manifest.optical_dates)?;
    let radar_dates = parse_dates(manifest_path, "radar_dates", &manifest.radar_dates)?;

    let mut ds = SitsDataset {
        name: manifest.name,
        class_names: manifest.class_names,
        optical_bands: manifest.optical_bands,
        radar_bands: manifest.radar_bands,
        optical_dates,
        radar_dates,
        samples: Vec::new(),
    };
    let table = manifest_path.with_file_name(&manifest.table);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(&table)
        .map_err(|e| csv_io(&table, e))?;

    let expected = header(&ds);
    let found = reader.headers().map_err(|e| csv_io(&table, e))?.clone();
    if found.len() != expected.len() {
        return Err(Error::format(
            &table,
            1,
            "header",
            format!("expected {} columns, found {}", expected.len(), found.len()),
        ));
    }
    if let Some((exp, got)) = expected.iter().zip(found.iter()).find(|(e, g)| e.as_str() != *g) {
        return Err(Error::format(&table, 1, got, format!("expected column {exp:?}")));
    }

    let shape = ds.shape();
    let n_opt = shape.optical_steps * shape.optical_bands;
    let n_rad = shape.radar_steps * shape.radar_bands;
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::format(&table, row, "", e.to_string()))?;
        if record.len() != expected.len() {
            return Err(Error::format(
                &table,
                row,
                "",
                format!("expected {} fields, found {}", expected.len(), record.len()),
            ));
        }
        let field = |c: usize| (&expected[c], &record[c]);
        let float = |c: usize| -> Result<f64> {
            let (name, raw) = field(c);
            raw.trim()
                .parse::<f64>()
                .map_err(|e| Error::format(&table, row, name.as_str(), format!("{raw:?}: {e}")))
        };
        let label: usize = record[1]
            .trim()
            .parse()
            .map_err(|e| Error::format(&table, row, "label", format!("{:?}: {e}", &record[1])))?;
        if label >= shape.num_classes {
            return Err(Error::format(
                &table,
                row,
                "label",
                format!("label {label} outside {} classes", shape.num_classes),
            ));
        }
        let optical: Vec<f64> = (2..2 + n_opt).map(float).collect::<Result<_>>()?;
        let radar: Vec<f64> = (2 + n_opt..2 + n_opt + n_rad).map(float).collect::<Result<_>>()?;
        let valid: Vec<bool> = (2 + n_opt + n_rad..expected.len())
            .map(|c| {
                let (name, raw) = field(c);
                match raw.trim() {
                    "1" | "true" => Ok(true),
                    "0" | "false" => Ok(false),
                    other => Err(Error::format(&table, row, name.as_str(), format!("bad validity flag {other:?}"))),
                }
            })
            .collect::<Result<_>>()?;
        for (t, ok) in valid.iter().enumerate() {
            for b in 0..shape.optical_bands {
                let c = 2 + t * shape.optical_bands + b;
                if *ok && !optical[c - 2].is_finite() {
                    return Err(Error::format(&table, row, expected[c].as_str(), "non-finite value at a valid date"));
                }
            }
        }
        for (k, v) in radar.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::format(&table, row, expected[2 + n_opt + k].as_str(), "non-finite radar value"));
            }
        }
        ds.samples.push(ObjectSample {
            object_id: record[0].to_string(),
            label,
            optical: Matrix::from_vec(shape.optical_steps, shape.optical_bands, optical)?,
            radar: Matrix::from_vec(shape.radar_steps, shape.radar_bands, radar)?,
            optical_valid: valid,
        });
    }
    if ds.samples.is_empty() {
        return Err(Error::format(&table, 2, "", "dataset table has no sample rows"));
    }
    ds.validate()
        .map_err(|e| Error::format(manifest_path, 0, "", e.to_string()))?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SynthSpec};
    use crate::numeric::RngStream;

    fn small() -> SitsDataset {
        let spec = SynthSpec {
            num_classes: 3,
            samples_per_class: 4,
            optical_steps: 5,
            radar_steps: 3,
            confusable_pairs: 1,
            ..SynthSpec::default()
        };
        generate_synthetic(&spec, &mut RngStream::new(2)).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let ds = small();
        let files = save_dataset(&ds, &dir.path().join("synth.toml")).unwrap();
        assert_eq!(files.table, dir.path().join("synth.csv"));
        assert_eq!(DatasetFiles::locate(&files.manifest).unwrap(), files);
        let back = load_dataset(&files.manifest).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn layout_34x5_optical_24x2_radar_has_218_features() {
        let mut ds = small();
        ds.optical_bands = ["B2", "B3", "B4", "B8", "NDVI"].map(String::from).to_vec();
        let start = NaiveDate::from_ymd_opt(2016, 4, 1).unwrap();
        ds.optical_dates = (0..34).map(|i| start + chrono::Duration::days(12 * i)).collect();
        ds.radar_dates = (0..24).map(|i| start + chrono::Duration::days(16 * i + 1)).collect();
        for s in &mut ds.samples {
            s.optical = Matrix::filled(34, 5, 0.2);
            s.radar = Matrix::filled(24, 2, 0.5);
            s.optical_valid = vec![true; 34];
        }
        let dir = tempfile::tempdir().unwrap();
        let files = save_dataset(&ds, &dir.path().join("wide.toml")).unwrap();
        let back = load_dataset(&files.manifest).unwrap();
        assert_eq!(back.shape().num_features(), 218);
    }

    #[test]
    fn empty_table_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let files = save_dataset(&small(), &dir.path().join("d.toml")).unwrap();
        let text = fs::read_to_string(&files.table).unwrap();
        let header_only = text.lines().next().unwrap().to_string() + "\n";
        fs::write(&files.table, header_only).unwrap();
        assert!(matches!(load_dataset(&files.manifest), Err(Error::Format { .. })));
    }

    #[test]
    fn bad_cell_names_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let files = save_dataset(&small(), &dir.path().join("d.toml")).unwrap();
        let text = fs::read_to_string(&files.table).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let mut fields: Vec<String> = lines[3].split(',').map(String::from).collect();
        fields[4] = "oops".into();
        lines[3] = fields.join(",");
        fs::write(&files.table, lines.join("\n")).unwrap();
        match load_dataset(&files.manifest) {
            Err(Error::Format { row, column, .. }) => {
                assert_eq!(row, 4);
                assert_eq!(column, "opt_0_B4");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_dataset(&dir.path().join("nope.toml")), Err(Error::Io { .. })));
    }

    #[test]
    fn wrong_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let files = save_dataset(&small(), &dir.path().join("d.toml")).unwrap();
        let text = fs::read_to_string(&files.table).unwrap();
        fs::write(&files.table, text.replacen("rad_0_VV", "rad_0_HH", 1)).unwrap();
        match load_dataset(&files.manifest) {
            Err(Error::Format { row, column, .. }) => {
                assert_eq!(row, 1);
                assert_eq!(column, "rad_0_HH");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
