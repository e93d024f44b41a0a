//! Pipeline configuration: nested module configs plus artifact paths,
//! settable from a flat `key=value` file with dotted namespaces
//! (`train.learning_rate=0.1`) and from repeated `--set` flags.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use floodwatch_core::{ScenarioConfig, SplitSpec, TrainConfig, WindowSpec};

/// Output locations of the pipeline artifacts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArtifactPaths {
    pub trace: PathBuf,
    pub dataset: PathBuf,
    pub model: PathBuf,
    pub history: PathBuf,
    pub report_txt: PathBuf,
    pub report_csv: PathBuf,
}

impl ArtifactPaths {
    /// Default artifact names rooted in `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        ArtifactPaths {
            trace: dir.join("trace.csv"),
            dataset: dir.join("dataset.csv"),
            model: dir.join("model.txt"),
            history: dir.join("history.csv"),
            report_txt: dir.join("report.txt"),
            report_csv: dir.join("report.csv"),
        }
    }

    fn all(&self) -> [(&'static str, &PathBuf); 6] {
        [
            ("paths.trace", &self.trace),
            ("paths.dataset", &self.dataset),
            ("paths.model", &self.model),
            ("paths.history", &self.history),
            ("paths.report_txt", &self.report_txt),
            ("paths.report_csv", &self.report_csv),
        ]
    }
}

impl Default for ArtifactPaths {
    fn default() -> Self {
        ArtifactPaths::in_dir(Path::new("out"))
    }
}

/// Everything one `pipeline` run needs. The default value is the shipped,
/// calibrated experiment configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineConfig {
    pub scenario: ScenarioConfig,
    pub window: WindowSpec,
    pub split: SplitSpec,
    pub train: TrainConfig,
    pub paths: ArtifactPaths,
}

fn parse<T>(key: &str, value: &str) -> Result<T>
where
    T: FromStr,
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| anyhow::anyhow!("config key `{key}`: bad value `{value}`: {e}"))
}

impl PipelineConfig {
    /// Loads defaults overlaid with a `key=value` file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut config = PipelineConfig::default();
        config.apply_file(path)?;
        Ok(config)
    }

    /// Applies every assignment in a `key=value` file. Lines that are empty
    /// or start with `#` are skipped.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').with_context(|| {
                format!("{}:{}: expected key=value, got `{line}`", path.display(), idx + 1)
            })?;
            self.set(key.trim(), value.trim())
                .with_context(|| format!("{}:{}", path.display(), idx + 1))?;
        }
        Ok(())
    }

    /// Sets one dotted key. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "scenario.n_sensors" => self.scenario.n_sensors = parse(key, value)?,
            "scenario.n_attackers" => self.scenario.n_attackers = parse(key, value)?,
            "scenario.duration_s" => self.scenario.duration_s = parse(key, value)?,
            "scenario.sensor_period_s" => self.scenario.sensor_period_s = parse(key, value)?,
            "scenario.sensor_jitter_frac" => self.scenario.sensor_jitter_frac = parse(key, value)?,
            "scenario.flood_rate_pps" => self.scenario.flood_rate_pps = parse(key, value)?,
            "scenario.attack_start_s" => self.scenario.attack_start_s = parse(key, value)?,
            "scenario.attack_end_s" => self.scenario.attack_end_s = parse(key, value)?,
            "scenario.sensor_bytes_min" => self.scenario.sensor_bytes_min = parse(key, value)?,
            "scenario.sensor_bytes_max" => self.scenario.sensor_bytes_max = parse(key, value)?,
            "scenario.flood_bytes_min" => self.scenario.flood_bytes_min = parse(key, value)?,
            "scenario.flood_bytes_max" => self.scenario.flood_bytes_max = parse(key, value)?,
            "scenario.seed" => self.scenario.seed = parse(key, value)?,
            "window.window_len_s" => self.window.window_len_s = parse(key, value)?,
            "window.attack_frac_threshold" => {
                self.window.attack_frac_threshold = parse(key, value)?
            }
            "split.val_frac" => self.split.val_frac = parse(key, value)?,
            "split.test_frac" => self.split.test_frac = parse(key, value)?,
            "split.seed" => self.split.seed = parse(key, value)?,
            "split.stratified" => self.split.stratified = parse(key, value)?,
            "train.learning_rate" => self.train.learning_rate = parse(key, value)?,
            "train.max_epochs" => self.train.max_epochs = parse(key, value)?,
            "train.patience" => self.train.patience = parse(key, value)?,
            "train.seed" => self.train.seed = parse(key, value)?,
            "train.threshold" => self.train.threshold = parse(key, value)?,
            "paths.trace" => self.paths.trace = PathBuf::from(value),
            "paths.dataset" => self.paths.dataset = PathBuf::from(value),
            "paths.model" => self.paths.model = PathBuf::from(value),
            "paths.history" => self.paths.history = PathBuf::from(value),
            "paths.report_txt" => self.paths.report_txt = PathBuf::from(value),
            "paths.report_csv" => self.paths.report_csv = PathBuf::from(value),
            other => bail!("unknown config key `{other}`"),
        }
        Ok(())
    }

    /// Points scenario, split, and training at one master seed.
    pub fn set_master_seed(&mut self, seed: u64) {
        self.scenario.seed = seed;
        self.split.seed = seed;
        self.train.seed = seed;
    }

    /// Re-roots every artifact at its default name inside `dir`.
    pub fn set_out_dir(&mut self, dir: &Path) {
        self.paths = ArtifactPaths::in_dir(dir);
    }

    /// Validates every nested config and that artifact paths are distinct.
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.window.validate()?;
        self.split.validate()?;
        self.train.validate()?;
        let paths = self.paths.all();
        for (i, (key_a, a)) in paths.iter().enumerate() {
            for (key_b, b) in &paths[i + 1..] {
                if a == b {
                    bail!("artifact paths must be distinct: {key_a} and {key_b} are both {}", a.display());
                }
            }
        }
        Ok(())
    }
}
