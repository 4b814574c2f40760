//! Wall-clock cost of token mixing as the context grows.

use std::hint::black_box;
use std::time::{Duration, Instant};

use phasor_core::attention::{mix_heads, AttnConfig};
use phasor_core::fft::{DftPlan, Direction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Context lengths used for the scaling fit.
pub const SIZES: [usize; 5] = [64, 128, 256, 512, 1024];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mixer {
    /// Unitary DFT over the token threads.
    Phasor,
    /// Multi-head `softmax(Q K^T / sqrt(d_k)) V` with the baseline's widths.
    Attention,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub mixer: Mixer,
    pub points: Vec<ScalingPoint>,
    /// Least-squares slope of `ln seconds` against `ln n`.
    pub slope: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct TimingOptions {
    /// Repeated measurements per size; the fastest is kept.
    pub rounds: usize,
    /// Minimum duration of one measurement.
    pub min_batch: Duration,
}

impl Default for TimingOptions {
    fn default() -> Self {
        TimingOptions {
            rounds: 7,
            min_batch: Duration::from_millis(4),
        }
    }
}

/// Seconds per call of `f`: the fastest of `rounds` batches, each at least `min_batch` long.
pub fn time_per_call(mut f: impl FnMut(), opts: TimingOptions) -> f64 {
    f();
    let mut iters = 1u64;
    loop {
        let start = Instant::now();
        for _ in 0..iters {
            f();
        }
        if start.elapsed() >= opts.min_batch || iters >= 1 << 24 {
            break;
        }
        iters *= 2;
    }
    (0..opts.rounds.max(1))
        .map(|_| {
            let start = Instant::now();
            for _ in 0..iters {
                f();
            }
            start.elapsed().as_secs_f64() / iters as f64
        })
        .fold(f64::INFINITY, f64::min)
}

/// Seconds per mixing call for `n` tokens.
pub fn mixing_seconds(mixer: Mixer, n: usize, opts: TimingOptions) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    match mixer {
        Mixer::Phasor => {
            let plan = DftPlan::new(n);
            let phases: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
            let (re0, im0): (Vec<f64>, Vec<f64>) = phases.iter().map(|p| (p.cos(), p.sin())).unzip();
            let (mut re, mut im) = (re0.clone(), im0.clone());
            time_per_call(
                || {
                    re.copy_from_slice(&re0);
                    im.copy_from_slice(&im0);
                    plan.apply_in_place(black_box(&mut re), black_box(&mut im), Direction::Forward);
                },
                opts,
            )
        }
        Mixer::Attention => {
            let cfg = AttnConfig::new(n);
            let qkv: Vec<f64> = (0..n * 3 * cfg.d_model).map(|_| rng.random_range(-1.0..1.0)).collect();
            time_per_call(
                || {
                    black_box(mix_heads(black_box(&qkv), n, &cfg));
                },
                opts,
            )
        }
    }
}

pub fn loglog_slope(points: &[ScalingPoint]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.seconds.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn measure(mixer: Mixer, sizes: &[usize], opts: TimingOptions) -> Scaling {
    let points: Vec<ScalingPoint> = sizes
        .iter()
        .map(|&n| ScalingPoint {
            n,
            seconds: mixing_seconds(mixer, n, opts),
        })
        .collect();
    let slope = loglog_slope(&points);
    Scaling { mixer, points, slope }
}
