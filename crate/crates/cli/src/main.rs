use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use floodwatch_cli::pipeline;
use floodwatch_cli::PipelineConfig;

/// Simulate an IoT sensor network under UDP-flood attack, extract windowed
/// traffic features, train a 6-3-1 perceptron, and report per-split
/// confusion matrices.
#[derive(Parser)]
#[command(name = "floodwatch", version, about, long_about = None)]
struct Cli {
    /// Key=value config file applied over the built-in defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override single config keys, e.g. --set train.learning_rate=0.2
    /// (repeatable; applied after --config).
    #[arg(long, global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Master seed: sets scenario.seed, split.seed and train.seed at once
    /// (applied last).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labelled packet trace for the configured scenario.
    Simulate {
        /// Trace CSV destination (default: paths.trace).
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Turn a packet trace into a windowed feature dataset.
    Extract {
        /// Trace CSV to read (default: paths.trace).
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
        /// Dataset CSV destination (default: paths.dataset).
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Split a dataset, train the classifier, save model and history.
    Train {
        /// Dataset CSV to read (default: paths.dataset).
        #[arg(long, value_name = "PATH")]
        dataset: Option<PathBuf>,
        /// Model file destination (default: paths.model).
        #[arg(long, value_name = "PATH")]
        model_out: Option<PathBuf>,
        /// Per-epoch history CSV destination (default: paths.history).
        #[arg(long, value_name = "PATH")]
        history_out: Option<PathBuf>,
    },
    /// Score a saved model on a dataset and write the reports.
    Evaluate {
        /// Dataset CSV to read (default: paths.dataset).
        #[arg(long, value_name = "PATH")]
        dataset: Option<PathBuf>,
        /// Model file to load (default: paths.model).
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        /// Text report destination (default: paths.report_txt).
        #[arg(long, value_name = "PATH")]
        report_txt: Option<PathBuf>,
        /// CSV report destination (default: paths.report_csv).
        #[arg(long, value_name = "PATH")]
        report_csv: Option<PathBuf>,
    },
    /// Run the whole experiment end to end and print the overall accuracy.
    Pipeline {
        /// Re-root every artifact at its default name inside this directory.
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },
    /// Compare backpropagation against finite differences.
    CheckGradients {
        /// Number of random (architecture, sample) pairs.
        #[arg(long, default_value_t = 100)]
        cases: usize,
    },
}

fn build_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut config = PipelineConfig::default();
    if let Some(path) = &cli.config {
        config.apply_file(path)?;
    }
    for assignment in &cli.set {
        let (key, value) = assignment
            .split_once('=')
            .with_context(|| format!("--set expects KEY=VALUE, got `{assignment}`"))?;
        config.set(key.trim(), value.trim())?;
    }
    if let Some(seed) = cli.seed {
        config.set_master_seed(seed);
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<bool> {
    let mut config = build_config(cli)?;
    match &cli.command {
        Command::Simulate { out } => {
            let out = out.clone().unwrap_or_else(|| config.paths.trace.clone());
            pipeline::cmd_simulate(&config.scenario, &out)?;
        }
        Command::Extract { trace, out } => {
            let trace = trace.clone().unwrap_or_else(|| config.paths.trace.clone());
            let out = out.clone().unwrap_or_else(|| config.paths.dataset.clone());
            pipeline::cmd_extract(&trace, &config.window, &out)?;
        }
        Command::Train { dataset, model_out, history_out } => {
            let dataset = dataset.clone().unwrap_or_else(|| config.paths.dataset.clone());
            let model_out = model_out.clone().unwrap_or_else(|| config.paths.model.clone());
            let history_out = history_out.clone().unwrap_or_else(|| config.paths.history.clone());
            pipeline::cmd_train(&dataset, &config.split, &config.train, &model_out, &history_out)?;
        }
        Command::Evaluate { dataset, model, report_txt, report_csv } => {
            let dataset = dataset.clone().unwrap_or_else(|| config.paths.dataset.clone());
            let model = model.clone().unwrap_or_else(|| config.paths.model.clone());
            let report_txt = report_txt.clone().unwrap_or_else(|| config.paths.report_txt.clone());
            let report_csv = report_csv.clone().unwrap_or_else(|| config.paths.report_csv.clone());
            pipeline::cmd_evaluate(
                &dataset,
                &model,
                &config.split,
                config.train.threshold,
                &report_txt,
                &report_csv,
            )?;
        }
        Command::Pipeline { out_dir } => {
            if let Some(dir) = out_dir {
                config.set_out_dir(dir);
            }
            pipeline::cmd_pipeline(&config)?;
        }
        Command::CheckGradients { cases } => {
            let seed = cli.seed.unwrap_or(config.train.seed);
            return pipeline::cmd_check_gradients(seed, *cases);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(err) => {
            // single machine-parsable line
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
