use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use lpm::cli::benchmark;
use lpm::experiment::{self, ExperimentConfig};
use lpm::timing::{self, Mixer, TimingOptions};
use phasor_core::attention::{self, AttnConfig};
use phasor_core::data::Dataset;
use phasor_core::fft::{naive_dft, Direction, DftPlan};
use phasor_core::gradients::{check_attention, check_phasor};
use phasor_core::math::fold_phase;
use phasor_core::phasor::{self, LpmConfig};
use phasor_core::ComplexVec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria whose failure is documented and does not fail the run.
const KNOWN_RED: [usize; 1] = [6];

type Check = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Check);

fn parameter_counts() -> Check {
    let phasor = [
        (LpmConfig::new(10, 2, true), 50),
        (LpmConfig::new(32, 1, false), 64),
        (LpmConfig::new(16, 3, true), 112),
    ];
    let mut ok = true;
    let mut got = Vec::new();
    for (cfg, want) in phasor {
        let n = phasor::count_params(&cfg);
        ok &= n == want;
        got.push(n.to_string());
    }
    let attn = attention::count_params(&AttnConfig::new(32));
    ok &= attn == 3329;
    let rho = attn as f64 / phasor::count_params(&LpmConfig::new(32, 1, false)) as f64;
    ok &= (rho - 52.02).abs() <= 0.01;
    Ok((ok, format!("phasor {} attention {attn} ratio {rho:.2}", got.join("/"))))
}

fn unitarity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut norm_err, mut oracle_err) = (0.0f64, 0.0f64);
    for t in [4, 8, 10, 16, 32, 64] {
        let plan = DftPlan::new(t);
        for _ in 0..100 {
            let re = (0..t).map(|_| rng.random_range(-1.0..1.0)).collect();
            let im = (0..t).map(|_| rng.random_range(-1.0..1.0)).collect();
            let z = ComplexVec::new(re, im);
            let fast = plan.forward(&z);
            norm_err = norm_err.max((fast.norm() - z.norm()).abs());
            oracle_err = oracle_err.max(fast.max_abs_diff(&naive_dft(&z, Direction::Forward)));
        }
    }
    Ok((
        norm_err <= 1e-10 && oracle_err <= 1e-9,
        format!("max norm drift {norm_err:.1e}, max deviation from matrix DFT {oracle_err:.1e}"),
    ))
}

fn pullback() -> Check {
    use std::f64::consts::{FRAC_PI_2, PI, TAU};
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut in_range, mut idempotent) = (true, true);
    let (mut period_err, mut sine_err) = (0.0f64, 0.0f64);
    for _ in 0..100_000 {
        let phi: f64 = rng.random_range(-10.0 * PI..=10.0 * PI);
        let y = fold_phase(phi);
        in_range &= (-FRAC_PI_2..=FRAC_PI_2).contains(&y);
        idempotent &= fold_phase(y).to_bits() == y.to_bits();
        period_err = period_err.max((fold_phase(phi + TAU) - y).abs());
        sine_err = sine_err.max((y.sin() - phi.sin()).abs());
    }
    Ok((
        in_range && idempotent && period_err <= 1e-12 && sine_err <= 1e-12,
        format!(
            "range {in_range}, idempotent {idempotent}, period drift {period_err:.1e}, sine drift {sine_err:.1e}"
        ),
    ))
}

fn gradients() -> Check {
    let reports = [
        check_phasor(LpmConfig::new(8, 1, true), 11, 10).map_err(|e| e.to_string())?,
        check_phasor(LpmConfig::new(8, 3, true), 12, 10).map_err(|e| e.to_string())?,
        check_attention(AttnConfig::new(8), 13, 10).map_err(|e| e.to_string())?,
    ];
    let ok = reports.iter().all(|r| r.passed && r.max_rel_err < 1e-4);
    let detail = reports
        .iter()
        .map(|r| match r.depth {
            Some(d) => format!("{} D={d} {:.1e}", r.model, r.max_rel_err),
            None => format!("{} {:.1e}", r.model, r.max_rel_err),
        })
        .collect::<Vec<_>>()
        .join(", ");
    Ok((ok, format!("max relative error: {detail}")))
}

fn t10_reproduction() -> Check {
    let r = experiment::run(&ExperimentConfig::preset("t10_single").map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let m = &r.metrics;
    let ratio = m.initial_loss() / m.final_loss();
    let test = m.test.ok_or("no test metrics")?.mse;
    Ok((
        ratio >= 10.0 && test < 0.15,
        format!(
            "train mse {:.4} -> {:.4} ({ratio:.1}x), test mse {test:.4}",
            m.initial_loss(),
            m.final_loss()
        ),
    ))
}

fn deep_stack() -> Check {
    let cfg = ExperimentConfig::preset("d3_rollout").map_err(|e| e.to_string())?;
    let r = experiment::run(&cfg).map_err(|e| e.to_string())?;
    let train_mse = r.metrics.train.mse;
    let split = Dataset::generate(cfg.data).and_then(|d| d.split()).map_err(|e| e.to_string())?;
    let bound = 2.0 * cfg.data.gen.amplitude_bound();
    let (mut max_abs, mut sq, mut n) = (0.0f64, 0.0, 0usize);
    let mut clean = Vec::new();
    for s in &split.test {
        let roll = r.checkpoint.rollout(&s.context, cfg.data.horizon).map_err(|e| e.to_string())?;
        if roll.truncated.is_some() || roll.predictions.len() != s.clean_future.len() {
            return Ok((false, format!("rollout stopped early on series {}", s.series_id)));
        }
        for (p, c) in roll.predictions.iter().zip(&s.clean_future) {
            max_abs = max_abs.max(p.abs());
            sq += (p - c) * (p - c);
            n += 1;
        }
        clean.extend_from_slice(&s.clean_future);
    }
    let rollout_mse = sq / n as f64;
    let mean = clean.iter().sum::<f64>() / clean.len() as f64;
    let variance = clean.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / clean.len() as f64;
    Ok((
        train_mse < 0.10 && max_abs <= bound && rollout_mse < variance,
        format!(
            "train mse {train_mse:.4} (needs < 0.10), rollout max|x| {max_abs:.3} (bound {bound:.1}), rollout mse {rollout_mse:.4} vs clean variance {variance:.4}"
        ),
    ))
}

fn benchmark_ordering() -> Check {
    let report = benchmark(None, false).map_err(|e| e.to_string())?;
    let [p, a] = &report.models[..] else {
        return Err("expected two models".into());
    };
    Ok((
        report.baseline_mae_below_phasor && report.both_below_constant_mean,
        format!(
            "test mae attention {:.4} < phasor {:.4} < constant mean {:.4}",
            a.test_mae, p.test_mae, report.constant_mean.mae
        ),
    ))
}

fn scaling() -> Check {
    let opts = TimingOptions::default();
    let p = timing::measure(Mixer::Phasor, &timing::SIZES, opts);
    let a = timing::measure(Mixer::Attention, &timing::SIZES, opts);
    Ok((
        p.slope <= 1.35 && a.slope >= 1.65,
        format!("log-log slope phasor {:.2} (<= 1.35), attention {:.2} (>= 1.65)", p.slope, a.slope),
    ))
}

fn lpm(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_lpm"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("lpm {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)))
    }
}

fn same_files(a: &Path, b: &Path, names: &[&str]) -> Result<bool, String> {
    for name in names {
        let read = |d: &Path| std::fs::read(d.join(name)).map_err(|e| format!("{}: {e}", d.join(name).display()));
        if read(a)? != read(b)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    let run_files = [
        experiment::METRICS_NAME,
        experiment::CURVE_NAME,
        experiment::CHECKPOINT_NAME,
        experiment::CONFIG_NAME,
    ];
    let mut checked = Vec::new();
    for preset in ["t10", "n32", "d3"] {
        let dirs = ["a", "b"].map(|r| root.join(format!("data_{preset}_{r}")));
        for d in &dirs {
            lpm(&["--out", d.to_str().unwrap(), "generate", "--preset", preset])?;
        }
        if !same_files(&dirs[0], &dirs[1], &["dataset.csv", "dataset.json"])? {
            return Ok((false, format!("dataset {preset} differs between runs")));
        }
        checked.push(format!("data {preset}"));
    }

    let mut attention = ExperimentConfig::preset("n32_attention").map_err(|e| e.to_string())?;
    attention.train.epochs = 5;
    let attention_path = root.join("n32_attention_short.json");
    lpm::json::write(&attention_path, &attention).map_err(|e| e.to_string())?;

    let runs: [(&str, Vec<&str>); 4] = [
        ("t10_single", vec!["--experiment", "t10_single"]),
        ("n32_phasor", vec!["--experiment", "n32_phasor"]),
        ("d3_rollout", vec!["--experiment", "d3_rollout"]),
        ("n32_attention", vec!["--config", attention_path.to_str().unwrap()]),
    ];
    for (name, args) in runs {
        let dirs = ["a", "b"].map(|r| root.join(format!("runs_{r}")));
        for d in &dirs {
            let mut full = vec!["--out", d.to_str().unwrap(), "--no-timing", "train"];
            full.extend(&args);
            lpm(&full)?;
        }
        let run_dirs = dirs.map(|d| d.join(name));
        if !same_files(&run_dirs[0], &run_dirs[1], &run_files)? {
            return Ok((false, format!("{name} run files differ between reruns")));
        }
        checked.push(name.to_string());
    }
    Ok((true, format!("byte-identical reruns: {}", checked.join(", "))))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("parameter counts", parameter_counts),
        ("unitary mixing", unitarity),
        ("pull-back fold", pullback),
        ("gradient fidelity", gradients),
        ("T=10 training", t10_reproduction),
        ("three-block stack and rollout", deep_stack),
        ("N=32 benchmark ordering", benchmark_ordering),
        ("mixing complexity", scaling),
        ("determinism", determinism),
    ];
    let mut unexpected = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        let start = Instant::now();
        let (pass, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        let secs = start.elapsed().as_secs_f64();
        let note = if !pass && KNOWN_RED.contains(&id) { " [known]" } else { "" };
        println!(
            "criterion {id}: {} {name}: {detail} ({secs:.1}s){note}",
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass && !KNOWN_RED.contains(&id) {
            unexpected.push(id);
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
