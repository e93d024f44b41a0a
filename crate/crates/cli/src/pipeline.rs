//! The pipeline commands: simulate, extract, train, evaluate, the end-to-end
//! run, and the gradient check. Every command is a pure function of its
//! config (seeds included) and prints key results as `key=value` lines.

use std::fs;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use floodwatch_core::{
    apply_normalization, class_counts, confusion, extract_windows, fit_normalization,
    gradient_check_suite, load_dataset, read_trace, save_dataset, simulate, split, train,
    write_trace, EvalReport, MlpModel, Sample, ScenarioConfig, SplitSpec, TrainConfig, WindowSpec,
};

use crate::config::PipelineConfig;

/// Hidden-layer width of the experiment's classifier (6-3-1 network).
pub const HIDDEN_UNITS: usize = 3;

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating directory {}", parent.display()))?;
        }
    }
    Ok(())
}

/// Simulates the scenario and writes the trace CSV. Returns the packet count.
pub fn cmd_simulate(scenario: &ScenarioConfig, out: &Path) -> Result<usize> {
    let trace = simulate(scenario)?;
    ensure_parent(out)?;
    write_trace(&trace, out).with_context(|| format!("writing trace {}", out.display()))?;
    println!("trace_packets={}", trace.len());
    println!("trace_path={}", out.display());
    Ok(trace.len())
}

/// Extracts windowed samples from a trace file and writes the dataset CSV.
/// Returns the sample count.
pub fn cmd_extract(trace_path: &Path, window: &WindowSpec, out: &Path) -> Result<usize> {
    let trace =
        read_trace(trace_path).with_context(|| format!("reading trace {}", trace_path.display()))?;
    let samples = extract_windows(&trace, window)?;
    ensure_parent(out)?;
    save_dataset(&samples, window, out)
        .with_context(|| format!("writing dataset {}", out.display()))?;
    let (attack, normal) = class_counts(&samples);
    println!("dataset_samples={}", samples.len());
    println!("dataset_attack={attack}");
    println!("dataset_normal={normal}");
    println!("dataset_path={}", out.display());
    Ok(samples.len())
}

/// Splits a raw dataset and normalizes each part with stats fitted on the
/// training split only.
fn normalized_splits(
    samples: &[Sample],
    spec: &SplitSpec,
) -> Result<(Vec<Sample>, Vec<Sample>, Vec<Sample>)> {
    let (train_raw, val_raw, test_raw) = split(samples, spec)?;
    let stats = fit_normalization(&train_raw)?;
    Ok((
        apply_normalization(&train_raw, &stats),
        apply_normalization(&val_raw, &stats),
        apply_normalization(&test_raw, &stats),
    ))
}

fn history_csv(history: &[floodwatch_core::EpochStats]) -> String {
    let mut out = String::from("epoch,train_mse,val_mse\n");
    for e in history {
        let _ = writeln!(out, "{},{},{}", e.epoch, e.train_mse, e.val_mse);
    }
    out
}

fn train_on(
    samples: &[Sample],
    split_spec: &SplitSpec,
    train_config: &TrainConfig,
) -> Result<(MlpModel, Vec<floodwatch_core::EpochStats>)> {
    let (train_set, val_set, _) = normalized_splits(samples, split_spec)?;
    let n_features = train_set
        .first()
        .map(|s| s.features.len())
        .context("training split is empty")?;
    let model = MlpModel::init(&[n_features, HIDDEN_UNITS, 1], train_config.seed)?;
    let (best, history) = train(model, &train_set, &val_set, train_config)?;
    Ok((best, history))
}

/// Trains the classifier on a dataset file; writes the model and the
/// per-epoch history CSV.
pub fn cmd_train(
    dataset_path: &Path,
    split_spec: &SplitSpec,
    train_config: &TrainConfig,
    model_out: &Path,
    history_out: &Path,
) -> Result<()> {
    let samples = load_dataset(dataset_path)
        .with_context(|| format!("reading dataset {}", dataset_path.display()))?;
    let (best, history) = train_on(&samples, split_spec, train_config)?;
    ensure_parent(model_out)?;
    best.save(model_out)
        .with_context(|| format!("writing model {}", model_out.display()))?;
    ensure_parent(history_out)?;
    fs::write(history_out, history_csv(&history))
        .with_context(|| format!("writing history {}", history_out.display()))?;
    let best_epoch = history
        .iter()
        .min_by(|a, b| a.val_mse.total_cmp(&b.val_mse))
        .map_or(0, |e| e.epoch);
    println!("epochs_run={}", history.len());
    println!("best_epoch={best_epoch}");
    println!("model_path={}", model_out.display());
    println!("history_path={}", history_out.display());
    Ok(())
}

fn evaluate_model(
    model: &MlpModel,
    samples: &[Sample],
    split_spec: &SplitSpec,
    threshold: f64,
) -> Result<EvalReport> {
    let (train_set, val_set, test_set) = normalized_splits(samples, split_spec)?;
    let score = |set: &[Sample]| -> Result<floodwatch_core::ConfusionMatrix> {
        let mut predictions = Vec::with_capacity(set.len());
        let mut truths = Vec::with_capacity(set.len());
        for s in set {
            predictions.push(model.predict(&s.features, threshold)?);
            truths.push(s.label);
        }
        Ok(confusion(&predictions, &truths)?)
    };
    Ok(EvalReport::new(score(&train_set)?, score(&val_set)?, score(&test_set)?)?)
}

fn write_report(report: &EvalReport, report_txt: &Path, report_csv: &Path) -> Result<()> {
    ensure_parent(report_txt)?;
    fs::write(report_txt, report.render_text())
        .with_context(|| format!("writing report {}", report_txt.display()))?;
    ensure_parent(report_csv)?;
    fs::write(report_csv, report.render_csv())
        .with_context(|| format!("writing report {}", report_csv.display()))?;
    Ok(())
}

/// Evaluates a saved model against a dataset file, writing the text and CSV
/// reports. Returns the overall accuracy and prints it as the last line.
pub fn cmd_evaluate(
    dataset_path: &Path,
    model_path: &Path,
    split_spec: &SplitSpec,
    threshold: f64,
    report_txt: &Path,
    report_csv: &Path,
) -> Result<f64> {
    let samples = load_dataset(dataset_path)
        .with_context(|| format!("reading dataset {}", dataset_path.display()))?;
    let model =
        MlpModel::load(model_path).with_context(|| format!("reading model {}", model_path.display()))?;
    let report = evaluate_model(&model, &samples, split_spec, threshold)?;
    write_report(&report, report_txt, report_csv)?;
    println!("report_txt_path={}", report_txt.display());
    println!("report_csv_path={}", report_csv.display());
    println!("overall_accuracy={:.4}", report.overall_accuracy());
    Ok(report.overall_accuracy())
}

/// Runs the whole experiment: simulate, extract, split, train, evaluate.
/// Writes every artifact and prints `overall_accuracy=<value>` as the final
/// line. Returns the overall accuracy.
pub fn cmd_pipeline(config: &PipelineConfig) -> Result<f64> {
    config.validate()?;

    let trace = simulate(&config.scenario)?;
    ensure_parent(&config.paths.trace)?;
    write_trace(&trace, &config.paths.trace)
        .with_context(|| format!("writing trace {}", config.paths.trace.display()))?;
    println!("trace_packets={}", trace.len());

    let samples = extract_windows(&trace, &config.window)?;
    ensure_parent(&config.paths.dataset)?;
    save_dataset(&samples, &config.window, &config.paths.dataset)
        .with_context(|| format!("writing dataset {}", config.paths.dataset.display()))?;
    let (attack, normal) = class_counts(&samples);
    println!("dataset_samples={}", samples.len());
    println!("dataset_attack={attack}");
    println!("dataset_normal={normal}");

    let (best, history) = train_on(&samples, &config.split, &config.train)?;
    ensure_parent(&config.paths.model)?;
    best.save(&config.paths.model)
        .with_context(|| format!("writing model {}", config.paths.model.display()))?;
    ensure_parent(&config.paths.history)?;
    fs::write(&config.paths.history, history_csv(&history))
        .with_context(|| format!("writing history {}", config.paths.history.display()))?;
    println!("epochs_run={}", history.len());

    let report = evaluate_model(&best, &samples, &config.split, config.train.threshold)?;
    write_report(&report, &config.paths.report_txt, &config.paths.report_csv)?;
    println!("overall_accuracy={:.4}", report.overall_accuracy());
    Ok(report.overall_accuracy())
}

/// Runs the finite-difference gradient check and prints a summary.
/// Returns whether every comparison passed.
pub fn cmd_check_gradients(seed: u64, cases: usize) -> Result<bool> {
    let summary = gradient_check_suite(seed, cases)?;
    println!("gradient_cases={}", summary.cases);
    println!("gradient_entries={}", summary.entries);
    println!("gradient_failures={}", summary.failures);
    println!("gradient_max_rel_err={:.3e}", summary.max_rel_err);
    println!("gradient_check={}", if summary.passed() { "PASS" } else { "FAIL" });
    Ok(summary.passed())
}
