//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit status if
//! any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use od2rnn_core::data::{gapfill, generate_synthetic, BlindSource};
use od2rnn_core::forest::{best_split, fit_forest, ForestConfig};
use od2rnn_core::layers::{softmax, AttentionHead};
use od2rnn_core::metrics::ConfusionMatrix;
use od2rnn_core::optim::{accuracy, train, Preset};
use od2rnn_core::pipeline::{compare, prepare_dataset, quiet, run_method, ExperimentConfig, Method};
use od2rnn_core::{EvaluationReport, LossWeights, ModelConfig, Od2rnnModel, RngStream, SynthSpec};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

fn gradient_correctness() -> Outcome {
    const INSTANCES: usize = 24;
    let start = Instant::now();
    let checks = [
        ("fc", common::check_fc(INSTANCES, 101)),
        ("gru_step", common::check_gru_step(INSTANCES, 102)),
        ("gru_sequence", common::check_gru_sequence(INSTANCES, 103)),
        ("attention", common::check_attention(INSTANCES, 104)),
        ("softmax_ce", common::check_softmax_cross_entropy(INSTANCES, 105)),
        ("model", common::check_model(INSTANCES, 6, 106)),
    ];
    let elapsed = start.elapsed();
    let worst = checks.iter().map(|c| c.1).fold(0.0, f64::max);
    let parts: Vec<String> = checks.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect();
    Outcome::new(
        worst < common::TOLERANCE && elapsed < Duration::from_secs(60),
        format!(
            "{INSTANCES} instances per check, eps {:e}; worst relative error {}; {}",
            common::EPS,
            parts.join(", "),
            secs(elapsed)
        ),
    )
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn loss_identity() -> Outcome {
    let mut rng = RngStream::new(2);
    let models: Vec<Od2rnnModel> = (2..=6).map(|c| Od2rnnModel::zeros(ModelConfig::desk(c)).unwrap()).collect();
    let mut worst_identity = 0.0f64;
    let mut worst_part = 0.0f64;
    for _ in 0..1000 {
        let model = &models[rng.below(models.len())];
        let c = model.num_classes();
        let scale = [0.1, 3.0, 40.0][rng.below(3)];
        let lr = rng.uniform(-scale, scale, c).unwrap();
        let lo = rng.uniform(-scale, scale, c).unwrap();
        let lf = rng.uniform(-scale, scale, c).unwrap();
        let y = rng.below(c);
        let b = model.loss(&lr, &lo, &lf, y).unwrap();
        let expected = 0.5 * b.radar + 0.5 * b.optical + b.fusion;
        worst_identity = worst_identity.max((b.total - expected).abs() / expected.abs().max(f64::MIN_POSITIVE));
        for (part, logits) in [(b.radar, &lr), (b.optical, &lo), (b.fusion, &lf)] {
            let ce = log_sum_exp(logits) - logits[y];
            worst_part = worst_part.max((part - ce).abs() / ce.abs().max(1e-300).max(1.0));
        }
    }
    Outcome::new(
        worst_identity <= 4.0 * f64::EPSILON && worst_part < 1e-12,
        format!("1000 triples; identity residual {worst_identity:.1e} (relative); parts vs log-sum-exp {worst_part:.1e}"),
    )
}

struct BruteMetrics {
    accuracy: f64,
    kappa: f64,
    weighted_f: f64,
    per_class: Vec<f64>,
}

fn brute_force_metrics(classes: usize, truth: &[usize], pred: &[usize]) -> BruteMetrics {
    let n = truth.len() as f64;
    let pairs: Vec<(usize, usize)> = truth.iter().copied().zip(pred.iter().copied()).collect();
    let correct = pairs.iter().filter(|(t, p)| t == p).count() as f64;
    let mut p_e = 0.0;
    let mut per_class = Vec::new();
    let mut weighted_f = 0.0;
    for c in 0..classes {
        let tp = pairs.iter().filter(|&&(t, p)| t == c && p == c).count() as f64;
        let actual = pairs.iter().filter(|&&(t, _)| t == c).count() as f64;
        let predicted = pairs.iter().filter(|&&(_, p)| p == c).count() as f64;
        p_e += (actual / n) * (predicted / n);
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = if actual > 0.0 { tp / actual } else { 0.0 };
        let f = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        weighted_f += actual * f / n;
        per_class.push(f);
    }
    let p_o = correct / n;
    BruteMetrics {
        accuracy: p_o,
        kappa: if p_e >= 1.0 { 0.0 } else { (p_o - p_e) / (1.0 - p_e) },
        weighted_f,
        per_class,
    }
}

fn metric_oracle() -> Outcome {
    let mut rng = RngStream::new(3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let classes = 2 + rng.below(7);
        let n = 1 + rng.below(250);
        let skill = rng.next_f64();
        let truth: Vec<usize> = (0..n).map(|_| rng.below(classes)).collect();
        let pred: Vec<usize> = truth
            .iter()
            .map(|&t| if rng.bernoulli(skill) { t } else { rng.below(classes) })
            .collect();
        let report = EvaluationReport::from_confusion(ConfusionMatrix::from_pairs(classes, &truth, &pred).unwrap()).unwrap();
        let brute = brute_force_metrics(classes, &truth, &pred);
        let mut diffs = vec![
            (report.accuracy - brute.accuracy).abs(),
            (report.kappa - brute.kappa).abs(),
            (report.f_measure - brute.weighted_f).abs(),
        ];
        diffs.extend(report.per_class_f.iter().zip(&brute.per_class).map(|(a, b)| (a - b).abs()));
        worst = diffs.into_iter().fold(worst, f64::max);
    }
    let cm = ConfusionMatrix::from_counts(&[[30, 10], [5, 55]]).unwrap();
    let r = EvaluationReport::from_confusion(cm).unwrap();
    let worked = (r.accuracy - 0.85).abs() < 1e-12 && (r.kappa - 0.68085).abs() < 1e-5 && (r.f_measure - 0.848).abs() < 1e-5;
    Outcome::new(
        worst < 1e-12 && worked,
        format!(
            "1000 random settings, worst deviation {worst:.1e}; [[30,10],[5,55]] -> accuracy {:.5}, kappa {:.5}, weighted F {:.5}",
            r.accuracy, r.kappa, r.f_measure
        ),
    )
}

fn overfit_sanity() -> Outcome {
    let start = Instant::now();
    let raw = generate_synthetic(&SynthSpec::default(), &mut RngStream::new(0)).unwrap();
    let (ds, _) = prepare_dataset(&raw).unwrap();
    let classes = ds.num_classes();
    let mut picked = vec![0usize; classes];
    let subset: Vec<_> = ds
        .samples
        .iter()
        .filter(|s| {
            let keep = picked[s.label] < 32 / classes;
            picked[s.label] += keep as usize;
            keep
        })
        .cloned()
        .collect();
    let config = ExperimentConfig::new(Preset::Desk, 0, 1).model_config(&ds, LossWeights::default());
    let model = Od2rnnModel::new(config, &mut RngStream::new(5)).unwrap();
    let mut train_config = Preset::Desk.train_config(5);
    train_config.epochs = 200;
    let outcome = train(model, &subset, &subset, &train_config).unwrap();
    let first_perfect = outcome.history.epochs.iter().find(|r| r.validation_accuracy == 1.0).map(|r| r.epoch);
    let final_accuracy = accuracy(&outcome.best_model, &subset).unwrap();
    let elapsed = start.elapsed();
    Outcome::new(
        subset.len() == 32 && final_accuracy == 1.0 && first_perfect.is_some() && elapsed < Duration::from_secs(60),
        format!(
            "{} samples; first 100% epoch {}; selected model training accuracy {:.4}; {}",
            subset.len(),
            first_perfect.map_or("none".to_string(), |e| e.to_string()),
            final_accuracy,
            secs(elapsed)
        ),
    )
}

fn fusion_superiority() -> Outcome {
    let start = Instant::now();
    let spec = SynthSpec::default();
    let raw = generate_synthetic(&spec, &mut RngStream::new(0)).unwrap();
    let (ds, _) = prepare_dataset(&raw).unwrap();
    let config = ExperimentConfig::new(Preset::Desk, 0, 5);
    let run = |m| run_method(&ds, &config, m, &mut quiet()).unwrap();
    let fusion = run(Method::Od2rnn);
    let optical = run(Method::Od2rnnOptical);
    let radar = run(Method::Od2rnnRadar);
    let elapsed = start.elapsed();

    let acc = |r: &od2rnn_core::pipeline::MethodResult| r.aggregate.accuracy.mean;
    let blind_f = |r: &od2rnn_core::pipeline::MethodResult, source| {
        spec.blind_classes(source)
            .into_iter()
            .map(|c| r.aggregate.per_class_f[c].mean)
            .fold(0.0, f64::max)
    };
    let optical_blind = blind_f(&optical, BlindSource::Optical);
    let radar_blind = blind_f(&radar, BlindSource::Radar);
    let pass = acc(&fusion) >= acc(&optical) + 0.05
        && acc(&fusion) >= acc(&radar) + 0.05
        && acc(&fusion) > 0.90
        && optical_blind < 0.60
        && radar_blind < 0.60
        && elapsed < Duration::from_secs(600);
    Outcome::new(
        pass,
        format!(
            "accuracy over 5 splits: OD2RNN {}, optical-only {}, radar-only {}; max F on blind pair: optical-only {:.2}%, radar-only {:.2}%; {}",
            fusion.aggregate.accuracy.percent(),
            optical.aggregate.accuracy.percent(),
            radar.aggregate.accuracy.percent(),
            100.0 * optical_blind,
            100.0 * radar_blind,
            secs(elapsed)
        ),
    )
}

fn gapfill_exactness() -> Outcome {
    let mut rng = RngStream::new(6);
    let mut max_error = 0.0f64;
    let mut preserved = true;
    for _ in 0..1000 {
        let t = 2 + rng.below(40);
        let mut day = rng.below(10) as f64;
        let days: Vec<f64> = (0..t)
            .map(|_| {
                let d = day;
                day += (1 + rng.below(15)) as f64;
                d
            })
            .collect();
        let (a, b) = (rng.below(2001) as f64 - 1000.0, rng.below(41) as f64 - 20.0);
        let truth: Vec<f64> = days.iter().map(|d| a + b * d).collect();
        let mut valid: Vec<bool> = (0..t).map(|_| rng.bernoulli(0.6)).collect();
        valid[0] = true;
        valid[t - 1] = true;
        let observed: Vec<f64> = truth
            .iter()
            .zip(&valid)
            .map(|(&v, &ok)| if ok { v } else { 1e6 * rng.normal() })
            .collect();
        let filled = gapfill(&observed, &valid, &days).unwrap();
        for i in 0..t {
            max_error = max_error.max((filled[i] - truth[i]).abs());
        }

        // arbitrary real values and masks: valid entries come back bit for bit
        let values = rng.uniform(-5.0, 5.0, t).unwrap();
        let mut mask: Vec<bool> = (0..t).map(|_| rng.bernoulli(0.5)).collect();
        mask[rng.below(t)] = true;
        let out = gapfill(&values, &mask, &days).unwrap();
        preserved &= (0..t).all(|i| !mask[i] || out[i].to_bits() == values[i].to_bits());
    }
    Outcome::new(
        max_error == 0.0 && preserved,
        format!("1000 masks; max reconstruction error {max_error:e}; valid entries bitwise preserved: {preserved}"),
    )
}

fn determinism() -> Outcome {
    let raw = generate_synthetic(&SynthSpec::default(), &mut RngStream::new(0)).unwrap();
    let (ds, _) = prepare_dataset(&raw).unwrap();
    let mut config = ExperimentConfig::new(Preset::Desk, 11, 2);
    config.train.epochs = 8;
    let start = Instant::now();
    let first = compare(&ds, &config, &mut quiet()).unwrap();
    let second = compare(&ds, &config, &mut quiet()).unwrap();
    let (a, b) = (first.render(), second.render());
    let json_equal = serde_json::to_string(&first).unwrap() == serde_json::to_string(&second).unwrap();
    Outcome::new(
        a.as_bytes() == b.as_bytes() && json_equal,
        format!(
            "two compare runs (seed 11, 2 splits, 8 epochs): rendered reports {} bytes, identical {}; JSON identical {}; {}",
            a.len(),
            a == b,
            json_equal,
            secs(start.elapsed())
        ),
    )
}

fn oracle_gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    1.0 - counts.iter().map(|&c| (c as f64 / n as f64).powi(2)).sum::<f64>()
}

/// Exhaustive search over every (feature, midpoint) pair.
fn brute_split(rows: &[Vec<f64>], labels: &[usize], classes: usize, features: &[usize]) -> Option<(usize, f64, f64)> {
    let counts = |idx: &mut dyn Iterator<Item = usize>| {
        let mut c = vec![0usize; classes];
        for i in idx {
            c[labels[i]] += 1;
        }
        c
    };
    let n = rows.len() as f64;
    let parent = oracle_gini(&counts(&mut (0..rows.len())));
    let mut candidates = Vec::new();
    for &f in features {
        let mut values: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let threshold = 0.5 * (w[0] + w[1]);
            let left = counts(&mut (0..rows.len()).filter(|&i| rows[i][f] <= threshold));
            let right = counts(&mut (0..rows.len()).filter(|&i| rows[i][f] > threshold));
            let (nl, nr) = (left.iter().sum::<usize>() as f64, right.iter().sum::<usize>() as f64);
            let decrease = parent - nl / n * oracle_gini(&left) - nr / n * oracle_gini(&right);
            candidates.push((f, threshold, decrease));
        }
    }
    let best = candidates.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
    if best <= 1e-12 {
        return None;
    }
    candidates
        .into_iter()
        .filter(|c| c.2 >= best - 1e-12)
        .min_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)))
}

fn rf_oracle() -> Outcome {
    let mut rng = RngStream::new(8);
    let mut mismatches = 0;
    let mut splits_found = 0;
    for _ in 0..200 {
        let n = 2 + rng.below(19);
        let d = 1 + rng.below(5);
        let classes = 2 + rng.below(3);
        let levels = 2 + rng.below(6);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.below(levels) as f64 * 0.5).collect()).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.below(classes)).collect();
        let k = 1 + rng.below(d);
        let features = rng.sample_indices(d, k);
        let got = best_split(&rows, &labels, &features).unwrap();
        let expected = brute_split(&rows, &labels, classes, &features);
        let same = match (&got, &expected) {
            (None, None) => true,
            (Some(s), Some((f, t, dec))) => {
                splits_found += 1;
                s.feature == *f && s.threshold == *t && (s.impurity_decrease - dec).abs() < 1e-12
            }
            _ => false,
        };
        mismatches += (!same) as usize;
    }

    // a single unrestricted tree on distinct rows memorises its training set
    let rows: Vec<Vec<f64>> = (0..150).map(|_| rng.uniform(0.0, 1.0, 4).unwrap()).collect();
    let labels: Vec<usize> = (0..150).map(|_| rng.below(5)).collect();
    let config = ForestConfig {
        num_trees: 1,
        max_depth: usize::MAX,
        features_per_split: Some(4),
        bootstrap: false,
        seed: 1,
    };
    let forest = fit_forest(&rows, &labels, 5, config).unwrap();
    let memorised = rows.iter().zip(&labels).filter(|(r, &y)| forest.predict(r).unwrap().class == y).count();
    Outcome::new(
        mismatches == 0 && memorised == rows.len(),
        format!(
            "200 instances ({splits_found} with a split), {mismatches} mismatches vs brute force; single tree training accuracy {memorised}/{}",
            rows.len()
        ),
    )
}

fn normalization() -> Outcome {
    let mut rng = RngStream::new(9);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let hidden = 1 + rng.below(8);
        let steps = 1 + rng.below(12);
        let scale = [0.01, 1.0, 30.0, 1e3][rng.below(4)];
        let head = AttentionHead::new(hidden, &mut rng);
        let hs: Vec<Vec<f64>> = (0..steps).map(|_| rng.uniform(-scale, scale, hidden).unwrap()).collect();
        let (out, _) = head.forward(&hs).unwrap();
        worst = worst.max((out.weights.iter().sum::<f64>() - 1.0).abs());
        let width = 2 + rng.below(10);
        let logits = rng.uniform(-scale, scale, width).unwrap();
        worst = worst.max((softmax(&logits).iter().sum::<f64>() - 1.0).abs());
    }
    Outcome::new(
        worst <= 1e-9,
        format!("10^4 attention passes and 10^4 softmax calls; worst |sum - 1| = {worst:.1e}"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("gradient correctness", gradient_correctness),
        ("weighted loss identity", loss_identity),
        ("metric oracle equivalence", metric_oracle),
        ("overfit sanity", overfit_sanity),
        ("fusion superiority", fusion_superiority),
        ("gap-filling exactness", gapfill_exactness),
        ("compare determinism", determinism),
        ("random forest oracle", rf_oracle),
        ("attention/softmax normalization", normalization),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let outcome = check();
        failed += (!outcome.pass) as usize;
        println!("[{}] {name}: {}", if outcome.pass { "PASS" } else { "FAIL" }, outcome.detail);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
