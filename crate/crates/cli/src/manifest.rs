use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use od2rnn_core::data::DatasetFiles;
use od2rnn_core::{Error, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// SHA-256 of a file's bytes, lowercase hex.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
    Ok(Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Serialize)]
pub struct DatasetRecord {
    pub manifest: PathBuf,
    pub table: PathBuf,
    /// Over the manifest bytes followed by the table bytes.
    pub digest: String,
}

impl DatasetRecord {
    pub fn new(files: &DatasetFiles) -> Result<Self> {
        Ok(Self {
            manifest: files.manifest.clone(),
            table: files.table.clone(),
            digest: files.digest()?,
        })
    }
}

#[derive(Debug, Serialize)]
pub struct Artifact {
    pub path: PathBuf,
    pub sha256: String,
}

/// Audit record written beside every command's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub seed: u64,
    /// Effective configuration after presets and overrides.
    pub config: Value,
    /// Flags that moved a preset value, as `name: preset -> used`.
    pub deviations: Vec<String>,
    /// Input dataset, or the dataset produced by `synth`.
    pub dataset: Option<DatasetRecord>,
    pub outputs: Vec<Artifact>,
    pub results: Value,
    /// Seconds per stage, plus `total`.
    pub timings: BTreeMap<String, f64>,
    #[serde(skip)]
    started: Option<Instant>,
}

impl RunManifest {
    pub fn new(command: &str, args: &[String], seed: u64) -> Self {
        Self {
            command: command.to_string(),
            args: args.to_vec(),
            seed,
            config: Value::Null,
            deviations: Vec::new(),
            dataset: None,
            outputs: Vec::new(),
            results: Value::Null,
            timings: BTreeMap::new(),
            started: Some(Instant::now()),
        }
    }

    /// Runs `f` and records its wall-clock time under `stage`.
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.insert(stage.to_string(), start.elapsed().as_secs_f64());
        out
    }

    /// Writes `contents` to `path` and lists it as an output.
    pub fn emit(&mut self, path: PathBuf, contents: &str) -> Result<()> {
        fs::write(&path, contents).map_err(|e| io_error(&path, e))?;
        self.record(path)
    }

    /// Lists an already written file as an output.
    pub fn record(&mut self, path: PathBuf) -> Result<()> {
        let sha256 = file_digest(&path)?;
        self.outputs.push(Artifact { path, sha256 });
        Ok(())
    }

    pub fn write(mut self, path: &Path) -> Result<()> {
        if let Some(start) = self.started {
            self.timings.insert("total".to_string(), start.elapsed().as_secs_f64());
        }
        let text = serde_json::to_string_pretty(&self).expect("manifest serialises");
        fs::write(path, text + "\n").map_err(|e| io_error(path, e))
    }
}
