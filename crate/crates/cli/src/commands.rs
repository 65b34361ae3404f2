use std::fs;
use std::path::{Path, PathBuf};

use od2rnn_core::data::{generate_synthetic, load_dataset, save_dataset, DatasetFiles};
use od2rnn_core::forest::flatten_features;
use od2rnn_core::metrics::aggregate;
use od2rnn_core::model::{read_checkpoint, write_checkpoint, Checkpoint};
use od2rnn_core::pipeline::{
    compare, evaluate_checkpoint, prepare_dataset, run_method, train_network_with, ExperimentConfig, Method,
};
use od2rnn_core::{LossWeights, Result, RngStream, SitsDataset, Source, SplitSpec};
use serde_json::json;

use crate::args::{BaselineArgs, Command, CompareArgs, EvalArgs, Streams, SynthArgs, TrainArgs};
use crate::manifest::{io_error, DatasetRecord, RunManifest};
use crate::CliError;

pub fn run(command: Command, args: &[String]) -> std::result::Result<(), CliError> {
    match command {
        Command::Synth(a) => synth(a, args),
        Command::Train(a) => train(a, args),
        Command::Eval(a) => eval(a, args),
        Command::Baseline(a) => baseline(a, args),
        Command::Compare(a) => compare_cmd(a, args),
    }
}

fn progress(line: &str) {
    eprintln!("{line}");
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

fn load(path: &Path, manifest: &mut RunManifest) -> Result<SitsDataset> {
    let files = DatasetFiles::locate(path)?;
    manifest.dataset = Some(DatasetRecord::new(&files)?);
    manifest.time("load", || load_dataset(path))
}

fn synth(a: SynthArgs, args: &[String]) -> std::result::Result<(), CliError> {
    let spec = a.spec();
    spec.validate().map_err(CliError::usage)?;
    let mut manifest = RunManifest::new("synth", args, a.seed);
    manifest.config = json!({ "synth": spec });
    let ds = manifest.time("generate", || generate_synthetic(&spec, &mut RngStream::new(a.seed)))?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let files = manifest.time("write", || save_dataset(&ds, &a.out))?;
    manifest.record(files.manifest.clone())?;
    manifest.record(files.table.clone())?;
    manifest.dataset = Some(DatasetRecord::new(&files)?);
    let shape = ds.shape();
    manifest.results = json!({
        "classes": ds.num_classes(),
        "samples": ds.len(),
        "class_counts": ds.class_counts(),
        "features": shape.num_features(),
    });
    manifest.write(&a.out.with_extension("run.json"))?;
    println!(
        "wrote {} objects ({} classes) to {} and {}",
        ds.len(),
        ds.num_classes(),
        files.manifest.display(),
        files.table.display()
    );
    Ok(())
}

fn deviation<T: PartialEq + std::fmt::Display>(log: &mut Vec<String>, name: &str, slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        if *slot != v {
            log.push(format!("{name}: {slot} -> {v}"));
        }
        *slot = v;
    }
}

fn train(a: TrainArgs, args: &[String]) -> std::result::Result<(), CliError> {
    let mut manifest = RunManifest::new("train", args, a.seed);
    let mut config = ExperimentConfig::new(a.preset, a.seed, 1);
    let mut deviations = Vec::new();
    deviation(&mut deviations, "epochs", &mut config.train.epochs, a.epochs);
    deviation(&mut deviations, "batch_size", &mut config.train.batch_size, a.batch_size);
    deviation(&mut deviations, "learning_rate", &mut config.train.learning_rate, a.learning_rate);
    config.train.validate().map_err(CliError::usage)?;

    let raw = load(&a.data, &mut manifest)?;
    let (prepared, normalizer) = manifest.time("preprocess", || prepare_dataset(&raw))?;
    let weights = match a.streams {
        Streams::Fusion => LossWeights::default(),
        Streams::Optical => LossWeights::optical_only(),
        Streams::Radar => LossWeights::radar_only(),
    };
    let mut model_config = config.model_config(&prepared, weights);
    deviation(&mut deviations, "hidden_optical", &mut model_config.optical.hidden_units, a.hidden_optical);
    deviation(&mut deviations, "hidden_radar", &mut model_config.radar.hidden_units, a.hidden_radar);
    deviation(&mut deviations, "dropout_optical", &mut model_config.optical.dropout_rate, a.dropout);
    deviation(&mut deviations, "dropout_radar", &mut model_config.radar.dropout_rate, a.dropout);
    model_config.validate().map_err(CliError::usage)?;

    create_dir(&a.out)?;
    let checkpoint_path = a.out.join("model.ckpt");
    config.train.checkpoint_path = Some(checkpoint_path.clone());
    manifest.deviations = deviations;
    manifest.config = json!({ "experiment": config, "model": model_config, "streams": a.streams });

    let run = manifest.time("train", || train_network_with(&prepared, &config, model_config, 0))?;
    let checkpoint = Checkpoint {
        model: run.outcome.best_model.clone(),
        normalizer: Some(normalizer),
    };
    write_checkpoint(&checkpoint_path, &checkpoint)?;
    manifest.record(checkpoint_path)?;
    let history_path = a.out.join("history.tsv");
    run.outcome.history.write_tsv(&history_path)?;
    manifest.record(history_path)?;
    let test = aggregate(std::slice::from_ref(&run.test_report))?;
    manifest.emit(a.out.join("test_report.tsv"), &test.to_tsv(&prepared.class_names))?;

    manifest.results = json!({
        "partition": run.partition.digest(),
        "best_epoch": run.outcome.best_epoch,
        "best_validation_accuracy": run.outcome.best_validation_accuracy,
        "test_accuracy": run.test_report.accuracy,
        "test_f_measure": run.test_report.f_measure,
        "test_kappa": run.test_report.kappa,
    });
    manifest.write(&a.out.join("run.json"))?;
    println!(
        "best epoch {} (validation accuracy {:.4}); test accuracy {:.4}, kappa {:.4}",
        run.outcome.best_epoch, run.outcome.best_validation_accuracy, run.test_report.accuracy, run.test_report.kappa
    );
    println!("checkpoint written to {}", a.out.join("model.ckpt").display());
    Ok(())
}

/// Writes table, TSV and JSON forms of a report plus the run manifest.
fn write_reports(
    manifest: RunManifest,
    out: Option<&PathBuf>,
    table: &str,
    tsv: Option<&str>,
    json: serde_json::Value,
) -> Result<()> {
    let Some(dir) = out else {
        return Ok(());
    };
    let mut manifest = manifest;
    create_dir(dir)?;
    manifest.emit(dir.join("report.txt"), table)?;
    if let Some(tsv) = tsv {
        manifest.emit(dir.join("report.tsv"), tsv)?;
    }
    manifest.emit(dir.join("report.json"), &(serde_json::to_string_pretty(&json).expect("report serialises") + "\n"))?;
    manifest.write(&dir.join("run.json"))
}

fn digest_lines(digests: &[String]) -> String {
    digests
        .iter()
        .enumerate()
        .map(|(r, d)| format!("split {r}: partition {d}\n"))
        .collect()
}

fn eval(a: EvalArgs, args: &[String]) -> std::result::Result<(), CliError> {
    let mut manifest = RunManifest::new("eval", args, a.seed);
    let spec = SplitSpec {
        seed: a.seed,
        repeats: a.splits,
        ..SplitSpec::default()
    };
    let checkpoint = read_checkpoint(&a.checkpoint)?;
    let raw = load(&a.data, &mut manifest)?;
    let (report, digests) = manifest.time("evaluate", || evaluate_checkpoint(&raw, &checkpoint, &spec, a.part))?;
    let table = format!("{}\n{}", report.render_table("OD2RNN", &raw.class_names), digest_lines(&digests));
    print!("{table}");
    manifest.config = json!({ "split": spec, "part": a.part, "checkpoint": a.checkpoint, "model": checkpoint.model.config });
    manifest.results = json!({ "accuracy": report.accuracy, "kappa": report.kappa, "f_measure": report.f_measure });
    let tsv = report.to_tsv(&raw.class_names);
    let json = json!({ "report": report, "partitions": digests });
    write_reports(manifest, a.out.as_ref(), &table, Some(&tsv), json)?;
    Ok(())
}

fn baseline(a: BaselineArgs, args: &[String]) -> std::result::Result<(), CliError> {
    let mut manifest = RunManifest::new("baseline", args, a.seed);
    let config = ExperimentConfig::new(a.preset, a.seed, a.splits);
    let raw = load(&a.data, &mut manifest)?;
    let (prepared, _) = manifest.time("preprocess", || prepare_dataset(&raw))?;
    let first = prepared.samples.first().ok_or_else(|| CliError::usage("dataset has no objects"))?;
    let lengths: serde_json::Map<String, serde_json::Value> = Source::ALL
        .iter()
        .map(|&s| (s.to_string(), json!(flatten_features(first, s).len())))
        .collect();
    let result = manifest.time("baseline", || {
        run_method(&prepared, &config, Method::Forest(a.source), &mut |l: &str| progress(l))
    })?;
    let mut table = result.aggregate.render_table(&result.name, &prepared.class_names);
    table.push('\n');
    for (r, (d, s)) in result.digests.iter().zip(&result.selections).enumerate() {
        table.push_str(&format!("split {r}: partition {d} ({s})\n"));
    }
    print!("{table}");
    manifest.config = json!({
        "experiment": { "seed": config.seed, "split": config.split, "grid": config.grid },
        "source": a.source,
        "feature_length": lengths[&a.source.to_string()],
        "feature_lengths": lengths,
    });
    manifest.results = json!({ "accuracy": result.aggregate.accuracy, "kappa": result.aggregate.kappa, "f_measure": result.aggregate.f_measure });
    let tsv = result.aggregate.to_tsv(&prepared.class_names);
    write_reports(manifest, a.out.as_ref(), &table, Some(&tsv), json!(result))?;
    Ok(())
}

fn compare_cmd(a: CompareArgs, args: &[String]) -> std::result::Result<(), CliError> {
    let mut manifest = RunManifest::new("compare", args, a.seed);
    let mut config = ExperimentConfig::new(a.preset, a.seed, a.splits);
    deviation(&mut manifest.deviations, "epochs", &mut config.train.epochs, a.epochs);
    let raw = load(&a.data, &mut manifest)?;
    let (prepared, _) = manifest.time("preprocess", || prepare_dataset(&raw))?;
    let comparison = manifest.time("compare", || compare(&prepared, &config, &mut |l: &str| progress(l)))?;
    let report = comparison.render();
    print!("{report}");
    manifest.config = json!({ "experiment": config, "model": config.model_config(&prepared, LossWeights::default()) });
    manifest.results = json!(comparison
        .methods
        .iter()
        .map(|m| (m.name.clone(), json!({ "accuracy": m.aggregate.accuracy, "kappa": m.aggregate.kappa, "f_measure": m.aggregate.f_measure })))
        .collect::<serde_json::Map<_, _>>());
    write_reports(manifest, a.out.as_ref(), &report, None, json!(comparison))?;
    Ok(())
}
