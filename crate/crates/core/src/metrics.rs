//! Confusion-matrix metrics and aggregation over repeated splits.
//!
//! Conventions: per-class F is 0 when precision + recall is 0, and κ is 0 when
//! the chance agreement `p_e` equals 1. The headline F-Measure is the
//! support-weighted mean of per-class F; the macro mean is reported alongside.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `counts[t][p]`: samples of true class `t` predicted as `p`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_counts<R: AsRef<[u64]>>(rows: &[R]) -> Result<Self> {
        let classes = rows.len();
        let mut cm = Self::new(classes);
        for (t, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != classes {
                return Err(Error::argument(format!(
                    "confusion matrix row {t} has {} entries, expected {classes}",
                    row.len()
                )));
            }
            cm.counts[t * classes..(t + 1) * classes].copy_from_slice(row);
        }
        Ok(cm)
    }

    pub fn from_pairs(classes: usize, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::shape(
                "confusion_matrix",
                format!("{} true labels", truth.len()),
                format!("{} predictions", predicted.len()),
            ));
        }
        let mut cm = Self::new(classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            cm.accumulate(t, p)?;
        }
        Ok(cm)
    }

    pub fn accumulate(&mut self, true_class: usize, predicted: usize) -> Result<()> {
        if true_class >= self.classes || predicted >= self.classes {
            return Err(Error::argument(format!(
                "class pair ({true_class}, {predicted}) outside {} classes",
                self.classes
            )));
        }
        self.counts[true_class * self.classes + predicted] += 1;
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.classes
    }

    pub fn count(&self, true_class: usize, predicted: usize) -> u64 {
        self.counts[true_class * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Row sums (true-class supports).
    pub fn support(&self) -> Vec<u64> {
        (0..self.classes).map(|t| (0..self.classes).map(|p| self.count(t, p)).sum()).collect()
    }

    /// Column sums.
    pub fn predicted_totals(&self) -> Vec<u64> {
        (0..self.classes).map(|p| (0..self.classes).map(|t| self.count(t, p)).sum()).collect()
    }

    fn nonempty_total(&self) -> Result<f64> {
        match self.total() {
            0 => Err(Error::state("metrics of an empty confusion matrix")),
            n => Ok(n as f64),
        }
    }

    pub fn accuracy(&self) -> Result<f64> {
        let n = self.nonempty_total()?;
        let trace: u64 = (0..self.classes).map(|c| self.count(c, c)).sum();
        Ok(trace as f64 / n)
    }

    /// Cohen's κ = (p_o − p_e) / (1 − p_e).
    pub fn kappa(&self) -> Result<f64> {
        let n = self.nonempty_total()?;
        let p_o = self.accuracy()?;
        let p_e: f64 = self
            .support()
            .iter()
            .zip(self.predicted_totals())
            .map(|(&r, c)| (r as f64 / n) * (c as f64 / n))
            .sum();
        if p_e >= 1.0 {
            return Ok(0.0);
        }
        Ok((p_o - p_e) / (1.0 - p_e))
    }

    pub fn per_class_f(&self) -> Result<Vec<f64>> {
        self.nonempty_total()?;
        let support = self.support();
        let predicted = self.predicted_totals();
        Ok((0..self.classes)
            .map(|c| {
                let tp = self.count(c, c) as f64;
                let precision = if predicted[c] == 0 { 0.0 } else { tp / predicted[c] as f64 };
                let recall = if support[c] == 0 { 0.0 } else { tp / support[c] as f64 };
                if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                }
            })
            .collect())
    }

    /// `(support-weighted F, per-class F)`.
    pub fn f_measure(&self) -> Result<(f64, Vec<f64>)> {
        let n = self.nonempty_total()?;
        let per_class = self.per_class_f()?;
        let weighted = per_class
            .iter()
            .zip(self.support())
            .map(|(f, s)| f * s as f64)
            .sum::<f64>()
            / n;
        Ok((weighted, per_class))
    }

    /// Unweighted mean of per-class F over classes with nonzero support.
    pub fn macro_f(&self) -> Result<f64> {
        let per_class = self.per_class_f()?;
        let present: Vec<f64> = per_class
            .iter()
            .zip(self.support())
            .filter(|(_, s)| *s > 0)
            .map(|(f, _)| *f)
            .collect();
        Ok(present.iter().sum::<f64>() / present.len() as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub accuracy: f64,
    pub f_measure: f64,
    pub f_macro: f64,
    pub kappa: f64,
    pub per_class_f: Vec<f64>,
    pub confusion: ConfusionMatrix,
}

impl EvaluationReport {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Result<Self> {
        let (f_measure, per_class_f) = confusion.f_measure()?;
        Ok(Self {
            accuracy: confusion.accuracy()?,
            f_measure,
            f_macro: confusion.macro_f()?,
            kappa: confusion.kappa()?,
            per_class_f,
            confusion,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.per_class_f.len()
    }
}

/// Mean and population standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }

    /// `"89.48 ± 0.36"` with values scaled by 100.
    pub fn percent(&self) -> String {
        format!("{:.2} ± {:.2}", 100.0 * self.mean, 100.0 * self.std)
    }

    /// `"0.8811 ± 0.0041"`.
    pub fn unit(&self) -> String {
        format!("{:.4} ± {:.4}", self.mean, self.std)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub accuracy: Stat,
    pub f_measure: Stat,
    pub f_macro: Stat,
    pub kappa: Stat,
    pub per_class_f: Vec<Stat>,
    pub splits: Vec<EvaluationReport>,
}

impl AggregateReport {
    pub fn num_classes(&self) -> usize {
        self.per_class_f.len()
    }

    /// Overall row (F-Measure, Kappa, Accuracy) followed by the per-class F row.
    pub fn render_table(&self, method: &str, class_names: &[String]) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<12} {:>16} {:>18} {:>16}", "Method", "F-Measure", "Kappa", "Accuracy");
        let _ = writeln!(out, "{}", overall_row(method, self));
        let _ = writeln!(out);
        let width = class_names.iter().map(|n| n.len()).max().unwrap_or(0).max(5);
        let _ = writeln!(out, "{:<width$} {:>16}", "Class", "F-Measure");
        for (c, stat) in self.per_class_f.iter().enumerate() {
            let name = class_names.get(c).map_or_else(|| c.to_string(), Clone::clone);
            let _ = writeln!(out, "{name:<width$} {:>16}", stat.percent());
        }
        out
    }

    /// Tab-separated, one row per split plus `mean` and `std` rows; columns
    /// are accuracy, f_measure, f_macro, kappa, then `f_<class>`.
    pub fn to_tsv(&self, class_names: &[String]) -> String {
        let mut out = String::from("split\taccuracy\tf_measure\tf_macro\tkappa");
        for c in 0..self.num_classes() {
            let _ = write!(out, "\tf_{}", class_names.get(c).map_or_else(|| c.to_string(), Clone::clone));
        }
        out.push('\n');
        for (i, r) in self.splits.iter().enumerate() {
            let _ = write!(out, "{i}\t{}\t{}\t{}\t{}", r.accuracy, r.f_measure, r.f_macro, r.kappa);
            for f in &r.per_class_f {
                let _ = write!(out, "\t{f}");
            }
            out.push('\n');
        }
        for (label, pick) in [("mean", (|s: &Stat| s.mean) as fn(&Stat) -> f64), ("std", |s: &Stat| s.std)] {
            let _ = write!(
                out,
                "{label}\t{}\t{}\t{}\t{}",
                pick(&self.accuracy),
                pick(&self.f_measure),
                pick(&self.f_macro),
                pick(&self.kappa)
            );
            for s in &self.per_class_f {
                let _ = write!(out, "\t{}", pick(s));
            }
            out.push('\n');
        }
        out
    }
}

/// One `Method  F ± sd  κ ± sd  Acc ± sd` line.
pub fn overall_row(method: &str, report: &AggregateReport) -> String {
    format!(
        "{method:<12} {:>16} {:>18} {:>16}",
        report.f_measure.percent(),
        report.kappa.unit(),
        report.accuracy.percent()
    )
}

pub fn aggregate(reports: &[EvaluationReport]) -> Result<AggregateReport> {
    let first = reports
        .first()
        .ok_or_else(|| Error::argument("aggregate needs at least one report"))?;
    let classes = first.num_classes();
    if let Some(r) = reports.iter().find(|r| r.num_classes() != classes) {
        return Err(Error::argument(format!(
            "cannot aggregate reports over {classes} and {} classes",
            r.num_classes()
        )));
    }
    let stat = |f: &dyn Fn(&EvaluationReport) -> f64| Stat::of(&reports.iter().map(f).collect::<Vec<_>>());
    Ok(AggregateReport {
        accuracy: stat(&|r| r.accuracy),
        f_measure: stat(&|r| r.f_measure),
        f_macro: stat(&|r| r.f_macro),
        kappa: stat(&|r| r.kappa),
        per_class_f: (0..classes).map(|c| stat(&|r| r.per_class_f[c])).collect(),
        splits: reports.to_vec(),
    })
}
