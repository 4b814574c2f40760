//! Seeded synthetic multi-frequency series, windowed into fixed splits.
//!
//! Each series is `x_t = sum_k A_k sin(2 pi f_k t + psi_k) + eps_t` with
//! `eps_t ~ N(0, sigma^2)`. Amplitudes, frequencies and phases are drawn
//! once per series. Series `i` of a dataset is generated from
//! `ChaCha8Rng::seed_from_u64(series_seed(seed, i))`, so every series can be
//! regenerated on its own and splits never share a series.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

/// Generator settings for one family of series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub num_components: usize,
    /// Cycles per step, `[lo, hi]`.
    pub freq_range: [f64; 2],
    pub amp_range: [f64; 2],
    pub noise_sigma: f64,
    pub series_len: usize,
    pub seed: u64,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            num_components: 3,
            freq_range: [0.02, 0.05],
            amp_range: [0.5, 1.5],
            noise_sigma: 0.1,
            series_len: 256,
            seed: 0,
        }
    }
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("generator: {msg}")));
        let [f_lo, f_hi] = self.freq_range;
        let [a_lo, a_hi] = self.amp_range;
        if self.num_components == 0 {
            return bad("at least one component required");
        }
        if !(f_lo > 0.0 && f_lo <= f_hi && f_hi.is_finite()) {
            return bad("frequency range must satisfy 0 < lo <= hi");
        }
        if !(a_lo > 0.0 && a_lo <= a_hi && a_hi.is_finite()) {
            return bad("amplitude range must satisfy 0 < lo <= hi");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise sigma must be finite and non-negative");
        }
        if self.series_len == 0 {
            return bad("series length must be positive");
        }
        Ok(())
    }

    /// Bound on `|x_t|` for the noiseless signal: `K * a_hi`.
    pub fn amplitude_bound(&self) -> f64 {
        self.num_components as f64 * self.amp_range[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

/// One generated series, with and without noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub components: Vec<Component>,
    pub clean: Vec<f64>,
    pub values: Vec<f64>,
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of series `index` under `master`: `splitmix64(master ^ splitmix64(index))`.
pub fn series_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

/// Sum of sinusoids with additive Gaussian noise, from `spec.seed`.
pub fn generate(spec: &GenSpec) -> Result<Series> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let components: Vec<Component> = (0..spec.num_components)
        .map(|_| Component {
            amplitude: rng.random_range(spec.amp_range[0]..=spec.amp_range[1]),
            frequency: rng.random_range(spec.freq_range[0]..=spec.freq_range[1]),
            phase: rng.random_range(0.0..math::TAU),
        })
        .collect();
    let clean: Vec<f64> = (0..spec.series_len)
        .map(|t| {
            components
                .iter()
                .map(|c| c.amplitude * math::sin(math::TAU * c.frequency * t as f64 + c.phase))
                .sum()
        })
        .collect();
    let values = clean
        .iter()
        .map(|&v| {
            let eps: f64 = rng.sample(StandardNormal);
            v + spec.noise_sigma * eps
        })
        .collect();
    Ok(Series {
        components,
        clean,
        values,
    })
}

/// Noisy values of [`generate`].
pub fn generate_series(spec: &GenSpec) -> Result<Vec<f64>> {
    Ok(generate(spec)?.values)
}

/// Context window with its one-step target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSample {
    pub series_id: usize,
    /// Index of the first context value in its series.
    pub start: usize,
    pub context: Vec<f64>,
    pub target: f64,
    /// Noiseless continuation `x_{T+1}, ..., x_{T+h}`.
    pub clean_future: Vec<f64>,
}

impl SequenceSample {
    pub fn clean_target(&self) -> Option<f64> {
        self.clean_future.first().copied()
    }
}

/// Stride-1 windows: `len - context - horizon + 1` samples.
///
/// `clean` (same length as `series`) fills each sample's noiseless continuation.
pub fn window(
    series: &[f64],
    clean: Option<&[f64]>,
    context: usize,
    horizon: usize,
) -> Result<Vec<SequenceSample>> {
    if context == 0 || horizon == 0 {
        return Err(Error::InvalidConfig("context and horizon must be positive".into()));
    }
    if series.len() < context + horizon {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            context,
            horizon,
        });
    }
    if let Some(c) = clean {
        if c.len() != series.len() {
            return Err(Error::LengthMismatch {
                expected: series.len(),
                got: c.len(),
            });
        }
    }
    let n = series.len() - context - horizon + 1;
    Ok((0..n)
        .map(|i| SequenceSample {
            series_id: 0,
            start: i,
            context: series[i..i + context].to_vec(),
            target: series[i + context],
            clean_future: clean
                .map(|c| c[i + context..i + context + horizon].to_vec())
                .unwrap_or_default(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    T10Single,
    N32VsAttention,
    D3Rollout,
}

impl Benchmark {
    pub const ALL: [Benchmark; 3] = [
        Benchmark::T10Single,
        Benchmark::N32VsAttention,
        Benchmark::D3Rollout,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::T10Single => "t10_single",
            Benchmark::N32VsAttention => "n32_vs_attention",
            Benchmark::D3Rollout => "d3_rollout",
        }
    }
}

/// Everything needed to regenerate a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetLayout {
    pub gen: GenSpec,
    pub context_len: usize,
    pub horizon: usize,
    pub train_series: usize,
    pub val_series: usize,
    pub test_series: usize,
}

impl DatasetLayout {
    /// Windows per series with `gen.series_len`.
    pub fn windows_per_series(&self) -> usize {
        (self.gen.series_len + 1).saturating_sub(self.context_len + self.horizon)
    }

    pub fn num_series(&self) -> usize {
        self.train_series + self.val_series + self.test_series
    }

    /// Split of series `id`: train ids first, then validation, then test.
    pub fn split_of(&self, id: usize) -> Split {
        if id < self.train_series {
            Split::Train
        } else if id < self.train_series + self.val_series {
            Split::Val
        } else {
            Split::Test
        }
    }

    /// Generator settings for series `id`.
    pub fn series_spec(&self, id: usize) -> GenSpec {
        GenSpec {
            seed: series_seed(self.gen.seed, id as u64),
            ..self.gen
        }
    }
}

/// Fixed-seed layout for a named benchmark.
///
/// Ten windows per series; 100 training series (1000 samples) everywhere,
/// 25 validation and 25 test series for `t10_single`/`d3_rollout`, and
/// 25 test series with no validation split for `n32_vs_attention`.
/// `d3_rollout` widens the upper frequency bound from 0.05 to 0.07.
pub fn benchmark_layout(name: Benchmark, seed: u64) -> DatasetLayout {
    const WINDOWS: usize = 10;
    let (context_len, horizon, freq_range, val_series) = match name {
        Benchmark::T10Single => (10, 1, [0.02, 0.05], 25),
        Benchmark::N32VsAttention => (32, 1, [0.02, 0.05], 0),
        Benchmark::D3Rollout => (16, 20, [0.02, 0.07], 25),
    };
    DatasetLayout {
        gen: GenSpec {
            freq_range,
            series_len: context_len + horizon - 1 + WINDOWS,
            seed,
            ..GenSpec::default()
        },
        context_len,
        horizon,
        train_series: 100,
        val_series,
        test_series: 25,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRecord {
    pub id: usize,
    pub split: Split,
    pub values: Vec<f64>,
    pub clean: Vec<f64>,
}

/// Generated series plus the layout they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub layout: DatasetLayout,
    pub series: Vec<SeriesRecord>,
}

impl Dataset {
    pub fn generate(layout: DatasetLayout) -> Result<Self> {
        layout.gen.validate()?;
        if layout.windows_per_series() == 0 {
            return Err(Error::SeriesTooShort {
                len: layout.gen.series_len,
                context: layout.context_len,
                horizon: layout.horizon,
            });
        }
        let series = (0..layout.num_series())
            .map(|id| {
                let s = generate(&layout.series_spec(id))?;
                Ok(SeriesRecord {
                    id,
                    split: layout.split_of(id),
                    values: s.values,
                    clean: s.clean,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Dataset { layout, series })
    }

    pub fn benchmark(name: Benchmark, seed: u64) -> Result<Self> {
        Self::generate(benchmark_layout(name, seed))
    }

    pub fn split(&self) -> Result<DatasetSplit> {
        let l = &self.layout;
        let mut out = DatasetSplit {
            context_len: l.context_len,
            horizon: l.horizon,
            train: Vec::new(),
            val: Vec::new(),
            test: Vec::new(),
        };
        for s in &self.series {
            let mut samples = window(&s.values, Some(&s.clean), l.context_len, l.horizon)?;
            for w in &mut samples {
                w.series_id = s.id;
            }
            match s.split {
                Split::Train => out.train.extend(samples),
                Split::Val => out.val.extend(samples),
                Split::Test => out.test.extend(samples),
            }
        }
        Ok(out)
    }
}

/// Windowed train/validation/test samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub context_len: usize,
    pub horizon: usize,
    pub train: Vec<SequenceSample>,
    pub val: Vec<SequenceSample>,
    pub test: Vec<SequenceSample>,
}

impl DatasetSplit {
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }
}

/// Shortcut for `Dataset::benchmark(name, seed)?.split()`.
pub fn make_benchmark(name: Benchmark, seed: u64) -> Result<DatasetSplit> {
    Dataset::benchmark(name, seed)?.split()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;
    use alloc::vec;

    #[test]
    fn noiseless_single_sinusoid_is_exact() {
        let spec = GenSpec {
            num_components: 1,
            freq_range: [0.1, 0.1],
            amp_range: [1.0, 1.0],
            noise_sigma: 0.0,
            series_len: 50,
            seed: 3,
        };
        let s = generate(&spec).unwrap();
        let c = s.components[0];
        assert_eq!((c.amplitude, c.frequency), (1.0, 0.1));
        for (t, &v) in s.values.iter().enumerate() {
            let want = (math::TAU * 0.1 * t as f64 + c.phase).sin();
            assert!((v - want).abs() < 1e-12);
        }
        assert_eq!(s.values, s.clean);
    }

    #[test]
    fn same_seed_same_series() {
        let spec = GenSpec {
            seed: 99,
            ..GenSpec::default()
        };
        let a = generate_series(&spec).unwrap();
        let b = generate_series(&spec).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        let c = generate_series(&GenSpec { seed: 100, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noise_statistics() {
        let spec = GenSpec {
            series_len: 100_000,
            noise_sigma: 0.1,
            seed: 12,
            ..GenSpec::default()
        };
        let s = generate(&spec).unwrap();
        let n = s.values.len() as f64;
        let eps: Vec<f64> = s.values.iter().zip(&s.clean).map(|(v, c)| v - c).collect();
        let mean = eps.iter().sum::<f64>() / n;
        let sd = (eps.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mean.abs() < 3.0 * 0.1 / n.sqrt(), "mean {mean}");
        assert!((sd - 0.1).abs() < 0.005, "sd {sd}");
    }

    #[test]
    fn invalid_specs() {
        let ok = GenSpec::default();
        assert!(ok.validate().is_ok());
        for bad in [
            GenSpec { freq_range: [0.0, 0.2], ..ok },
            GenSpec { freq_range: [0.3, 0.2], ..ok },
            GenSpec { amp_range: [0.0, 1.0], ..ok },
            GenSpec { noise_sigma: -1.0, ..ok },
            GenSpec { num_components: 0, ..ok },
            GenSpec { series_len: 0, ..ok },
        ] {
            assert!(matches!(generate(&bad), Err(Error::InvalidConfig(_))), "{bad:?}");
        }
    }

    #[test]
    fn window_examples() {
        let series: Vec<f64> = (1..=12).map(f64::from).collect();
        let w = window(&series, None, 10, 1).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!((w[0].target, w[1].target), (11.0, 12.0));
        assert_eq!(w[1].context, series[1..11].to_vec());

        for (len, t, h) in [(40usize, 10usize, 1usize), (45, 16, 20), (41, 32, 1), (36, 16, 20)] {
            let s = vec![0.5; len];
            assert_eq!(window(&s, Some(&s), t, h).unwrap().len(), len - t - h + 1);
        }
        assert!(matches!(
            window(&series, None, 10, 3),
            Err(Error::SeriesTooShort { len: 12, context: 10, horizon: 3 })
        ));
    }

    #[test]
    fn clean_future_is_the_noiseless_tail() {
        let clean: Vec<f64> = (0..30).map(|t| t as f64).collect();
        let noisy: Vec<f64> = clean.iter().map(|v| v + 0.5).collect();
        let w = window(&noisy, Some(&clean), 5, 4).unwrap();
        assert_eq!(w[2].clean_future, vec![7.0, 8.0, 9.0, 10.0]);
        assert_eq!(w[2].clean_target(), Some(7.0));
        assert_eq!(w[2].target, 7.5);
    }

    #[test]
    fn benchmark_sizes() {
        let n32 = make_benchmark(Benchmark::N32VsAttention, 0).unwrap();
        assert_eq!(n32.counts(), (1000, 0, 250));
        assert_eq!(n32.context_len, 32);
        let t10 = make_benchmark(Benchmark::T10Single, 0).unwrap();
        assert_eq!(t10.counts(), (1000, 250, 250));
        assert_eq!(t10.context_len, 10);
        let d3 = make_benchmark(Benchmark::D3Rollout, 0).unwrap();
        assert_eq!(d3.counts(), (1000, 250, 250));
        assert_eq!((d3.context_len, d3.horizon), (16, 20));
        assert!(d3.test.iter().all(|s| s.clean_future.len() == 20));
    }

    #[test]
    fn splits_share_no_series() {
        for name in Benchmark::ALL {
            let d = make_benchmark(name, 5).unwrap();
            let ids = |v: &[SequenceSample]| v.iter().map(|s| s.series_id).collect::<BTreeSet<_>>();
            let (tr, va, te) = (ids(&d.train), ids(&d.val), ids(&d.test));
            assert!(tr.is_disjoint(&te) && tr.is_disjoint(&va) && va.is_disjoint(&te));
        }
    }

    #[test]
    fn series_seeds_are_distinct() {
        let seeds: BTreeSet<u64> = (0..1000).map(|i| series_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }
}
