//! Experiment configs, presets and run artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use phasor_core::attention::{AttentionModel, AttnConfig};
use phasor_core::data::{benchmark_layout, Benchmark, Dataset, DatasetLayout, DatasetSplit};
use phasor_core::phasor::{Lpm, LpmConfig};
use phasor_core::train::{train, GradientAudit, MetricsRecord, Regressor, TrainConfig, TrainOutcome};
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::error::{LpmError, Result};
use crate::json::{self, fmt_f64, FORMAT_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Phasor(LpmConfig),
    Attention(AttnConfig),
}

impl ModelSpec {
    pub fn context_len(&self) -> usize {
        match self {
            ModelSpec::Phasor(c) => c.context_len,
            ModelSpec::Attention(c) => c.context_len,
        }
    }

    pub fn num_params(&self) -> usize {
        match self {
            ModelSpec::Phasor(c) => c.num_params(),
            ModelSpec::Attention(c) => c.num_params(),
        }
    }
}

/// Everything needed to rerun one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    /// How the preset reads the underspecified parts of the original setup.
    #[serde(default)]
    pub notes: String,
    #[serde(default)]
    pub benchmark: Option<Benchmark>,
    #[serde(default)]
    pub run_id: Option<String>,
    pub data: DatasetLayout,
    pub model: ModelSpec,
    pub train: TrainConfig,
}

pub const EXPERIMENT_PRESETS: [&str; 4] = ["t10_single", "n32_phasor", "n32_attention", "d3_rollout"];

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let text = match name {
            "t10_single" => include_str!("../presets/t10_single.json"),
            "n32_phasor" => include_str!("../presets/n32_phasor.json"),
            "n32_attention" => include_str!("../presets/n32_attention.json"),
            "d3_rollout" => include_str!("../presets/d3_rollout.json"),
            other => return Err(LpmError::UnknownPreset(other.to_string())),
        };
        let cfg: Self = serde_json::from_str(text).map_err(|source| LpmError::Json {
            path: PathBuf::from(format!("presets/{name}.json")),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let cfg: Self = json::read(path)?;
        cfg.validate()
            .map_err(|e| LpmError::format(path, e.to_string()))?;
        Ok(cfg)
    }

    /// Uses `seed` for both data generation and training.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.data.gen.seed = seed;
        self.train.seed = seed;
        self
    }

    pub fn run_id(&self) -> String {
        self.run_id.clone().unwrap_or_else(|| self.name.clone())
    }

    pub fn validate(&self) -> Result<()> {
        self.data.gen.validate()?;
        self.train.validate()?;
        if self.model.context_len() != self.data.context_len {
            return Err(LpmError::Usage(format!(
                "model context {} does not match data context {}",
                self.model.context_len(),
                self.data.context_len
            )));
        }
        match &self.model {
            ModelSpec::Phasor(c) => c.validate()?,
            ModelSpec::Attention(c) => c.validate()?,
        }
        Ok(())
    }
}

/// Dataset layout for `t10`, `n32`, `d3` or their full benchmark names.
pub fn dataset_preset(name: &str, seed: u64) -> Result<(Benchmark, DatasetLayout)> {
    let bench = match name {
        "t10" | "t10_single" => Benchmark::T10Single,
        "n32" | "n32_vs_attention" => Benchmark::N32VsAttention,
        "d3" | "d3_rollout" => Benchmark::D3Rollout,
        other => return Err(LpmError::UnknownPreset(other.to_string())),
    };
    Ok((bench, benchmark_layout(bench, seed)))
}

/// Trained parameters with their metrics.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub checkpoint: Checkpoint,
    pub metrics: MetricsRecord,
    pub audit: GradientAudit,
}

fn timed<M: Regressor>(
    model: &M,
    split: &DatasetSplit,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<M::Params>> {
    let start = Instant::now();
    let mut out = train(model, split, cfg)?;
    out.metrics.wall_clock_seconds = Some(start.elapsed().as_secs_f64());
    Ok(out)
}

/// Trains the configured model on `split`.
pub fn run_on(cfg: &ExperimentConfig, split: &DatasetSplit) -> Result<RunResult> {
    cfg.validate()?;
    Ok(match cfg.model {
        ModelSpec::Phasor(config) => {
            let out = timed(&Lpm::new(config)?, split, &cfg.train)?;
            RunResult {
                checkpoint: Checkpoint::Phasor { config, params: out.params },
                metrics: out.metrics,
                audit: out.audit,
            }
        }
        ModelSpec::Attention(config) => {
            let out = timed(&AttentionModel::new(config)?, split, &cfg.train)?;
            RunResult {
                checkpoint: Checkpoint::Attention { config, params: out.params },
                metrics: out.metrics,
                audit: out.audit,
            }
        }
    })
}

/// Generates the configured dataset and trains on it.
pub fn run(cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    let split = Dataset::generate(cfg.data)?.split()?;
    run_on(cfg, &split)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub format_version: u32,
    pub experiment: String,
    pub run_id: String,
    pub data_seed: u64,
    pub train_seed: u64,
    pub metrics: MetricsRecord,
}

pub const CHECKPOINT_NAME: &str = "checkpoint.json";
pub const METRICS_NAME: &str = "metrics.json";
pub const CURVE_NAME: &str = "curve.csv";
pub const CONFIG_NAME: &str = "config.json";

pub fn metrics_file(cfg: &ExperimentConfig, metrics: &MetricsRecord, timing: bool) -> MetricsFile {
    let mut metrics = metrics.clone();
    if !timing {
        metrics.wall_clock_seconds = None;
    }
    MetricsFile {
        format_version: FORMAT_VERSION,
        experiment: cfg.name.clone(),
        run_id: cfg.run_id(),
        data_seed: cfg.data.gen.seed,
        train_seed: cfg.train.seed,
        metrics,
    }
}

/// `epoch,loss` rows of the convergence curve.
pub fn curve_csv(metrics: &MetricsRecord) -> String {
    json::csv_string(
        &["epoch", "loss"],
        metrics
            .train_loss
            .iter()
            .enumerate()
            .map(|(e, l)| vec![e.to_string(), fmt_f64(*l)]),
    )
}

/// Writes config, checkpoint, metrics and curve files into `dir`.
pub fn write_run(dir: &Path, cfg: &ExperimentConfig, result: &RunResult, timing: bool) -> Result<()> {
    json::write(&dir.join(CONFIG_NAME), cfg)?;
    result.checkpoint.save(&dir.join(CHECKPOINT_NAME))?;
    json::write(&dir.join(METRICS_NAME), &metrics_file(cfg, &result.metrics, timing))?;
    json::write_text(&dir.join(CURVE_NAME), &curve_csv(&result.metrics))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_match_the_benchmarks() {
        let want = [
            ("t10_single", Benchmark::T10Single, 50),
            ("n32_phasor", Benchmark::N32VsAttention, 64),
            ("n32_attention", Benchmark::N32VsAttention, 3329),
            ("d3_rollout", Benchmark::D3Rollout, 112),
        ];
        for (name, bench, params) in want {
            let cfg = ExperimentConfig::preset(name).unwrap();
            assert_eq!(cfg.name, name);
            assert_eq!(cfg.benchmark, Some(bench));
            assert_eq!(cfg.data, benchmark_layout(bench, 0), "{name}");
            assert_eq!(cfg.model.num_params(), params, "{name}");
            assert!(!cfg.notes.is_empty());
        }
        assert!(ExperimentConfig::preset("nope").is_err());
    }

    #[test]
    fn preset_train_settings() {
        let t10 = ExperimentConfig::preset("t10_single").unwrap();
        assert_eq!(t10.train, TrainConfig::phasor());
        let attn = ExperimentConfig::preset("n32_attention").unwrap();
        assert_eq!(attn.train, TrainConfig::attention());
    }

    #[test]
    fn config_round_trips_through_json() {
        for name in EXPERIMENT_PRESETS {
            let cfg = ExperimentConfig::preset(name).unwrap().with_seed(9);
            let back: ExperimentConfig = serde_json::from_str(&json::to_string(&cfg)).unwrap();
            assert_eq!(back, cfg);
        }
    }
}
