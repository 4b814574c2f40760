//! The `lpm` command line.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use phasor_core::attention::AttnConfig;
use phasor_core::data::{Dataset, DatasetLayout, SequenceSample};
use phasor_core::gradients::{check_attention, check_phasor, GradCheckReport};
use phasor_core::phasor::LpmConfig;
use phasor_core::train::{constant_mean_baseline, Metrics};
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::dataset;
use crate::error::{LpmError, Result};
use crate::experiment::{self, dataset_preset, ExperimentConfig, RunResult};
use crate::json::{self, fmt_f64, FORMAT_VERSION};
use crate::timing::{self, Mixer, Scaling, TimingOptions};

/// Default output root when neither `--out` nor `LPM_OUT` is set.
pub const DEFAULT_OUT: &str = "runs";

#[derive(Debug, Parser)]
#[command(name = "lpm", version, about = "Phase-native sequence models: data, training and diagnostics")]
pub struct Cli {
    /// Seed for data generation and training.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "LPM_OUT")]
    pub out: Option<PathBuf>,
    /// Experiment (train) or dataset layout (generate) JSON file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Leave wall-clock fields empty so reruns produce identical files.
    #[arg(long, global = true)]
    pub no_timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Phasor,
    Attention,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write dataset.csv and dataset.json for a preset or layout file.
    Generate {
        /// t10, n32 or d3.
        #[arg(long)]
        preset: Option<String>,
    },
    /// Train a preset or configured experiment.
    Train {
        /// t10_single, n32_phasor, n32_attention or d3_rollout.
        #[arg(long)]
        experiment: Option<String>,
        /// Directory written by `generate`; generated from the config when absent.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Score a checkpoint on one split of a dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
    },
    /// Continue one window autoregressively.
    Rollout {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
        /// Index of the prompt window within the split.
        #[arg(long, default_value_t = 0)]
        sample: usize,
        #[arg(long, default_value_t = 20)]
        steps: usize,
    },
    /// Train both models on a shared split and compare them.
    Benchmark {
        #[arg(long, default_value = "n32")]
        preset: String,
    },
    /// Compare analytic and finite-difference gradients.
    CheckGrads {
        #[arg(long, value_enum)]
        model: ModelArg,
        /// Context length.
        #[arg(long = "context", default_value_t = 8)]
        context_len: usize,
        /// Phasor depth.
        #[arg(long, default_value_t = 2)]
        depth: usize,
        /// Drop the phasor readout shift.
        #[arg(long)]
        no_readout: bool,
        #[arg(long, default_value_t = 10)]
        points: usize,
    },
}

impl Cli {
    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}

fn split_samples(split: &phasor_core::data::DatasetSplit, which: SplitArg) -> &[SequenceSample] {
    match which {
        SplitArg::Train => &split.train,
        SplitArg::Val => &split.val,
        SplitArg::Test => &split.test,
    }
}

fn split_name(which: SplitArg) -> &'static str {
    match which {
        SplitArg::Train => "train",
        SplitArg::Val => "val",
        SplitArg::Test => "test",
    }
}

/// Runs one command and returns the lines to print on success.
pub fn run(cli: &Cli) -> Result<Vec<String>> {
    match &cli.command {
        Command::Generate { preset } => generate(cli, preset.as_deref()),
        Command::Train { experiment, data } => train_cmd(cli, experiment.as_deref(), data.as_deref()),
        Command::Eval { checkpoint, data, split } => eval_cmd(cli, checkpoint, data, *split),
        Command::Rollout { checkpoint, data, split, sample, steps } => {
            rollout_cmd(cli, checkpoint, data, *split, *sample, *steps)
        }
        Command::Benchmark { preset } => benchmark_cmd(cli, preset),
        Command::CheckGrads { model, context_len, depth, no_readout, points } => {
            check_grads_cmd(cli, *model, *context_len, *depth, !*no_readout, *points)
        }
    }
}

fn generate(cli: &Cli, preset: Option<&str>) -> Result<Vec<String>> {
    let (name, mut layout) = match (preset, &cli.config) {
        (Some(p), None) => {
            let (bench, layout) = dataset_preset(p, 0)?;
            (bench.name().to_string(), layout)
        }
        (None, Some(path)) => {
            let value: serde_json::Value = json::read(path)?;
            let layout: DatasetLayout = if value.get("data").is_some() {
                ExperimentConfig::from_file(path)?.data
            } else {
                serde_json::from_value(value).map_err(|source| LpmError::Json { path: path.clone(), source })?
            };
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("custom");
            (stem.to_string(), layout)
        }
        _ => return Err(LpmError::Usage("generate needs exactly one of --preset or --config".into())),
    };
    if let Some(seed) = cli.seed {
        layout.gen.seed = seed;
    }
    let data = Dataset::generate(layout)?;
    let out = cli.out_dir();
    let (csv, side) = dataset::write(&out, &name, &data)?;
    let (tr, va, te) = data.split()?.counts();
    Ok(vec![
        format!("wrote {} and {}", csv.display(), side.display()),
        format!("{name}: {} samples ({tr} train / {va} val / {te} test)", tr + va + te),
    ])
}

fn experiment_config(cli: &Cli, experiment: Option<&str>) -> Result<ExperimentConfig> {
    let cfg = match (experiment, &cli.config) {
        (Some(name), None) => ExperimentConfig::preset(name)?,
        (None, Some(path)) => ExperimentConfig::from_file(path)?,
        _ => return Err(LpmError::Usage("train needs exactly one of --experiment or --config".into())),
    };
    Ok(match cli.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn train_cmd(cli: &Cli, experiment: Option<&str>, data: Option<&Path>) -> Result<Vec<String>> {
    let cfg = experiment_config(cli, experiment)?;
    let result = match data {
        Some(dir) => {
            let (_, ds) = dataset::read(dir)?;
            if ds.layout.context_len != cfg.model.context_len() {
                return Err(LpmError::Usage(format!(
                    "dataset context {} does not match model context {}",
                    ds.layout.context_len,
                    cfg.model.context_len()
                )));
            }
            experiment::run_on(&cfg, &ds.split()?)?
        }
        None => experiment::run(&cfg)?,
    };
    let dir = cli.out_dir().join(cfg.run_id());
    experiment::write_run(&dir, &cfg, &result, !cli.no_timing)?;
    Ok(train_summary(&cfg, &result, &dir))
}

fn train_summary(cfg: &ExperimentConfig, r: &RunResult, dir: &Path) -> Vec<String> {
    let m = &r.metrics;
    let mut lines = vec![
        format!("{}: {} parameters, {} epochs", cfg.name, m.num_params, m.train_loss.len() - 1),
        format!("train loss {} -> {}", fmt_f64(m.initial_loss()), fmt_f64(m.final_loss())),
    ];
    if let Some(t) = m.test {
        lines.push(format!("test mse {} mae {}", fmt_f64(t.mse), fmt_f64(t.mae)));
    }
    lines.push(format!("wrote {}", dir.display()));
    lines
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u32,
    pub model: String,
    pub num_params: usize,
    pub split: String,
    pub metrics: Metrics,
}

fn eval_cmd(cli: &Cli, checkpoint: &Path, data: &Path, which: SplitArg) -> Result<Vec<String>> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let (_, ds) = dataset::read(data)?;
    let split = ds.split()?;
    let metrics = ckpt.evaluate(split_samples(&split, which))?;
    let report = EvalReport {
        format_version: FORMAT_VERSION,
        model: model_name(&ckpt).to_string(),
        num_params: ckpt.num_params(),
        split: split_name(which).to_string(),
        metrics,
    };
    let path = cli.out_dir().join("eval.json");
    json::write(&path, &report)?;
    Ok(vec![json::to_string(&report).trim_end().to_string(), format!("wrote {}", path.display())])
}

fn model_name(c: &Checkpoint) -> &'static str {
    match c {
        Checkpoint::Phasor { .. } => "phasor",
        Checkpoint::Attention { .. } => "attention",
    }
}

/// `step,predicted,clean_reference` rows; the reference is empty past the stored horizon.
pub fn rollout_csv(predictions: &[f64], clean: &[f64]) -> String {
    json::csv_string(
        &["step", "predicted", "clean_reference"],
        predictions.iter().enumerate().map(|(i, p)| {
            vec![
                (i + 1).to_string(),
                fmt_f64(*p),
                clean.get(i).map(|c| fmt_f64(*c)).unwrap_or_default(),
            ]
        }),
    )
}

fn rollout_cmd(
    cli: &Cli,
    checkpoint: &Path,
    data: &Path,
    which: SplitArg,
    sample: usize,
    steps: usize,
) -> Result<Vec<String>> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let (_, ds) = dataset::read(data)?;
    let split = ds.split()?;
    let samples = split_samples(&split, which);
    let prompt = samples.get(sample).ok_or_else(|| {
        LpmError::Usage(format!("sample {sample} out of range ({} in split)", samples.len()))
    })?;
    let r = ckpt.rollout(&prompt.context, steps)?;
    let path = cli.out_dir().join("rollout.csv");
    json::write_text(&path, &rollout_csv(&r.predictions, &prompt.clean_future))?;
    let mut lines = vec![format!("wrote {} ({} steps)", path.display(), r.predictions.len())];
    if let Some(e) = r.truncated {
        lines.push(format!("rollout stopped early: {e}"));
    }
    Ok(lines)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub model: String,
    pub experiment: String,
    pub num_params: usize,
    pub test_mse: f64,
    pub test_mae: f64,
    pub train_seconds: Option<f64>,
    pub mixing: Option<Scaling>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub format_version: u32,
    pub preset: String,
    pub data_seed: u64,
    pub models: Vec<ModelRow>,
    pub constant_mean: Metrics,
    /// Baseline parameters per phasor parameter.
    pub param_ratio: f64,
    pub baseline_mae_below_phasor: bool,
    pub both_below_constant_mean: bool,
}

/// Trains `n32_phasor` and `n32_attention` on one split, concurrently.
pub fn benchmark(seed: Option<u64>, timing: bool) -> Result<BenchmarkReport> {
    let mut phasor = ExperimentConfig::preset("n32_phasor")?;
    let mut attention = ExperimentConfig::preset("n32_attention")?;
    if let Some(s) = seed {
        phasor = phasor.with_seed(s);
        attention = attention.with_seed(s);
    }
    if phasor.data != attention.data {
        return Err(LpmError::Usage("benchmark models must share one dataset".into()));
    }
    let split = Dataset::generate(phasor.data)?.split()?;
    let (p, a) = std::thread::scope(|s| {
        let hp = s.spawn(|| experiment::run_on(&phasor, &split));
        let ha = s.spawn(|| experiment::run_on(&attention, &split));
        (
            hp.join().expect("phasor training thread panicked"),
            ha.join().expect("attention training thread panicked"),
        )
    });
    let (p, a) = (p?, a?);
    let constant_mean = constant_mean_baseline(&split.train, &split.test)?;
    let row = |cfg: &ExperimentConfig, r: &RunResult, mixer: Mixer| -> Result<ModelRow> {
        let test = r
            .metrics
            .test
            .ok_or_else(|| LpmError::Usage("benchmark split has no test samples".into()))?;
        Ok(ModelRow {
            model: r.metrics.model.clone(),
            experiment: cfg.name.clone(),
            num_params: r.metrics.num_params,
            test_mse: test.mse,
            test_mae: test.mae,
            train_seconds: if timing { r.metrics.wall_clock_seconds } else { None },
            mixing: timing.then(|| timing::measure(mixer, &timing::SIZES, TimingOptions::default())),
        })
    };
    let pr = row(&phasor, &p, Mixer::Phasor)?;
    let ar = row(&attention, &a, Mixer::Attention)?;
    Ok(BenchmarkReport {
        format_version: FORMAT_VERSION,
        preset: "n32".into(),
        data_seed: phasor.data.gen.seed,
        param_ratio: ar.num_params as f64 / pr.num_params as f64,
        baseline_mae_below_phasor: ar.test_mae < pr.test_mae,
        both_below_constant_mean: ar.test_mae < constant_mean.mae && pr.test_mae < constant_mean.mae,
        constant_mean,
        models: vec![pr, ar],
    })
}

fn benchmark_cmd(cli: &Cli, preset: &str) -> Result<Vec<String>> {
    if !matches!(preset, "n32" | "n32_vs_attention") {
        return Err(LpmError::UnknownPreset(preset.to_string()));
    }
    let report = benchmark(cli.seed, !cli.no_timing)?;
    let path = cli.out_dir().join("benchmark_n32.json");
    json::write(&path, &report)?;
    let mut lines: Vec<String> = report
        .models
        .iter()
        .map(|m| {
            let slope = m
                .mixing
                .as_ref()
                .map(|s| format!("{:.2}", s.slope))
                .unwrap_or_else(|| "-".into());
            format!(
                "{:<10} params {:>5}  test mse {:.4}  mae {:.4}  mixing slope {slope}",
                m.model, m.num_params, m.test_mse, m.test_mae
            )
        })
        .collect();
    lines.push(format!(
        "constant mean mae {:.4}; parameter ratio {:.2}",
        report.constant_mean.mae, report.param_ratio
    ));
    lines.push(format!("wrote {}", path.display()));
    Ok(lines)
}

fn check_grads_cmd(
    cli: &Cli,
    model: ModelArg,
    context_len: usize,
    depth: usize,
    readout: bool,
    points: usize,
) -> Result<Vec<String>> {
    let seed = cli.seed.unwrap_or(0);
    let report: GradCheckReport = match model {
        ModelArg::Phasor => check_phasor(LpmConfig::new(context_len, depth, readout), seed, points)?,
        ModelArg::Attention => check_attention(AttnConfig::new(context_len), seed, points)?,
    };
    let path = cli.out_dir().join(format!("check_grads_{}.json", report.model));
    json::write(&path, &report)?;
    let text = json::to_string(&report);
    if !report.passed {
        return Err(LpmError::Usage(format!(
            "gradient check failed: max relative error {} >= {}\n{text}",
            fmt_f64(report.max_rel_err),
            report.tolerance
        )));
    }
    Ok(vec![text.trim_end().to_string(), format!("wrote {}", path.display())])
}
