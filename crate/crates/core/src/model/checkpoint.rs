//! Text checkpoint container.
//!
//! ```text
//! od2rnn-checkpoint 1
//! num_classes <C>
//! loss_weights <radar> <optical> <fusion>
//! stream optical <bands> <fc1> <fc2> <hidden> <dropout>
//! stream radar <bands> <fc1> <fc2> <hidden> <dropout>
//! tensor <name> <rows> <cols>
//! <rows*cols values, space separated>
//! ...
//! scaling <optical|radar> <band count>
//! <min> <max>            (one line per band)
//! end
//! ```
//!
//! Floats are written in Rust's shortest round-trip decimal form, so a
//! write/read cycle reproduces every `f64` bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{LossWeights, ModelConfig, Od2rnnModel, StreamConfig};
use crate::data::{BandScaling, Normalizer};
use crate::error::{Error, Result};

const MAGIC: &str = "od2rnn-checkpoint";
const VERSION: u32 = 1;

/// A model plus the input scaling it was trained with.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Od2rnnModel,
    pub normalizer: Option<Normalizer>,
}

fn stream_line(name: &str, s: &StreamConfig) -> String {
    format!(
        "stream {name} {} {} {} {} {}\n",
        s.input_bands, s.fc1_units, s.fc2_units, s.hidden_units, s.dropout_rate
    )
}

pub fn write_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    fs::write(path, encode(checkpoint)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode(&text).map_err(|(line, msg)| Error::format(path, line, "checkpoint", msg))
}

pub(crate) fn encode(checkpoint: &Checkpoint) -> String {
    let model = &checkpoint.model;
    let cfg = &model.config;
    let mut out = format!("{MAGIC} {VERSION}\nnum_classes {}\n", cfg.num_classes);
    let w = cfg.loss_weights;
    let _ = writeln!(out, "loss_weights {} {} {}", w.radar, w.optical, w.fusion);
    out.push_str(&stream_line("optical", &cfg.optical));
    out.push_str(&stream_line("radar", &cfg.radar));
    for (name, m) in model.tensors() {
        let _ = writeln!(out, "tensor {name} {} {}", m.rows(), m.cols());
        let values: Vec<String> = m.as_slice().iter().map(|v| v.to_string()).collect();
        out.push_str(&values.join(" "));
        out.push('\n');
    }
    if let Some(n) = &checkpoint.normalizer {
        for (source, bands) in [("optical", &n.optical), ("radar", &n.radar)] {
            let _ = writeln!(out, "scaling {source} {}", bands.len());
            for b in bands {
                let _ = writeln!(out, "{} {}", b.min, b.max);
            }
        }
    }
    out.push_str("end\n");
    out
}

type Parse<T> = std::result::Result<T, (usize, String)>;

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Parse<Vec<&'a str>> {
        let (i, line) = self
            .inner
            .next()
            .ok_or_else(|| (self.last + 1, "unexpected end of checkpoint".to_string()))?;
        self.last = i + 1;
        Ok(line.split_whitespace().collect())
    }

    fn err<T>(&self, msg: impl Into<String>) -> Parse<T> {
        Err((self.last, msg.into()))
    }

    fn keyed(&mut self, key: &str, arity: usize) -> Parse<Vec<&'a str>> {
        let f = self.next()?;
        if f.first() != Some(&key) || f.len() != arity + 1 {
            return self.err(format!("expected `{key}` with {arity} values"));
        }
        Ok(f[1..].to_vec())
    }

    fn num<T: std::str::FromStr>(&self, raw: &str) -> Parse<T> {
        raw.parse().map_err(|_| (self.last, format!("invalid number {raw:?}")))
    }

    fn stream(&mut self, name: &str) -> Parse<StreamConfig> {
        let f = self.keyed("stream", 6)?;
        if f[0] != name {
            return self.err(format!("expected {name} stream"));
        }
        Ok(StreamConfig {
            input_bands: self.num(f[1])?,
            fc1_units: self.num(f[2])?,
            fc2_units: self.num(f[3])?,
            hidden_units: self.num(f[4])?,
            dropout_rate: self.num(f[5])?,
        })
    }

    fn scaling(&mut self, first: Vec<&str>, source: &str) -> Parse<Vec<BandScaling>> {
        if first.len() != 3 || first[0] != "scaling" || first[1] != source {
            return self.err(format!("expected {source} scaling block"));
        }
        let n: usize = self.num(first[2])?;
        (0..n)
            .map(|_| {
                let v = self.next()?;
                if v.len() != 2 {
                    return self.err("expected `min max`");
                }
                Ok(BandScaling {
                    min: self.num(v[0])?,
                    max: self.num(v[1])?,
                })
            })
            .collect()
    }
}

fn decode(text: &str) -> Parse<Checkpoint> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let header = lines.next()?;
    if header.first() != Some(&MAGIC) {
        return lines.err("not an od2rnn checkpoint");
    }
    let version: u32 = lines.num(header.get(1).copied().unwrap_or(""))?;
    if version != VERSION {
        return lines.err(format!("unsupported checkpoint version {version}"));
    }
    let num_classes = {
        let f = lines.keyed("num_classes", 1)?;
        lines.num(f[0])?
    };
    let loss_weights = {
        let f = lines.keyed("loss_weights", 3)?;
        LossWeights {
            radar: lines.num(f[0])?,
            optical: lines.num(f[1])?,
            fusion: lines.num(f[2])?,
        }
    };
    let config = ModelConfig {
        optical: lines.stream("optical")?,
        radar: lines.stream("radar")?,
        num_classes,
        loss_weights,
    };
    let mut model = Od2rnnModel::zeros(config).map_err(|e| (lines.last, e.to_string()))?;
    let expected: Vec<(String, (usize, usize))> = model
        .tensors()
        .into_iter()
        .map(|(n, m)| (n, m.shape()))
        .collect();
    for (tensor, (name, shape)) in model.tensors_mut().into_iter().zip(expected) {
        let f = lines.keyed("tensor", 3)?;
        let found: (usize, usize) = (lines.num(f[1])?, lines.num(f[2])?);
        if f[0] != name || found != shape {
            return lines.err(format!(
                "expected tensor {name} {}x{}, found {} {}x{}",
                shape.0, shape.1, f[0], found.0, found.1
            ));
        }
        let values = lines.next()?;
        if values.len() != tensor.len() {
            return lines.err(format!("tensor {name}: {} values for {} entries", values.len(), tensor.len()));
        }
        for (slot, raw) in tensor.as_mut_slice().iter_mut().zip(values) {
            *slot = lines.num(raw)?;
        }
    }

    let mut normalizer = None;
    let f = lines.next()?;
    if f.first() == Some(&"scaling") {
        let optical = lines.scaling(f, "optical")?;
        let next = lines.next()?;
        let radar = lines.scaling(next, "radar")?;
        normalizer = Some(Normalizer { optical, radar });
        let end = lines.next()?;
        if end != ["end"] {
            return lines.err("expected `end`");
        }
    } else if f != ["end"] {
        return lines.err("expected `scaling` or `end`");
    }
    Ok(Checkpoint { model, normalizer })
}
