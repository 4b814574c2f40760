//! Analytic gradients of whole models against central finite differences.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{AttentionModel, AttnConfig, AttnParams};
use crate::autodiff::gradcheck::{central_difference, max_relative_errors};
use crate::autodiff::Tape;
use crate::error::Result;
use crate::math;
use crate::phasor::{Lpm, LpmConfig, LpmParams};
use crate::train::Regressor;

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Largest accepted relative error.
pub const TOLERANCE: f64 = 1e-4;
/// Windows per check point.
pub const WINDOWS_PER_POINT: usize = 4;

/// Smallest `|cos phi|` at pull-back inputs accepted by the phasor sampler.
pub const MIN_COS_MARGIN: f64 = 0.1;
/// Smallest readout modulus accepted by the phasor sampler.
pub const MIN_READOUT_MODULUS: f64 = 1e-3;
/// Smallest distance of the readout phase from the `+-pi` cut.
pub const MIN_CUT_DISTANCE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupError {
    pub name: String,
    pub len: usize,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub model: String,
    pub context_len: usize,
    pub depth: Option<usize>,
    pub seed: u64,
    pub points: usize,
    pub step: f64,
    pub tolerance: f64,
    /// Worst error of each parameter group over all points.
    pub groups: Vec<GroupError>,
    pub max_rel_err: f64,
    pub passed: bool,
}

/// Largest relative error per parameter group of the MSE over `windows`.
pub fn group_errors<M: Regressor>(
    model: &M,
    params: &M::Params,
    windows: &[Vec<f64>],
    targets: &[f64],
    step: f64,
) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let refs: Vec<&[f64]> = windows.iter().map(Vec::as_slice).collect();
    let preds = model.record(&mut tape, params, &refs)?;
    let loss = tape.mse(preds, targets)?;
    let analytic = tape.backward(loss)?;
    let mut failure = None;
    let numeric = central_difference(
        |groups| {
            let loss = model.params_from_groups(groups).and_then(|p| {
                windows.iter().zip(targets).try_fold(0.0, |acc, (x, y)| {
                    let e = model.predict(x, &p)? - y;
                    Ok(acc + e * e)
                })
            });
            match loss {
                Ok(l) => l / windows.len() as f64,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        &model.groups(params),
        step,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(max_relative_errors(&analytic, &numeric))
}

fn random_windows(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    (0..WINDOWS_PER_POINT)
        .map(|_| (0..n).map(|_| rng.random_range(-1.5..1.5)).collect())
        .collect()
}

/// Phases in `[-pi, pi]` and windows whose pull-back inputs, readout modulus
/// and readout phase all keep clear of non-differentiable points.
pub fn phasor_point(model: &Lpm, rng: &mut ChaCha8Rng) -> Result<(LpmParams, Vec<Vec<f64>>)> {
    let cfg = model.config();
    loop {
        let params = LpmParams::uniform(cfg, math::PI, rng);
        let windows = random_windows(rng, cfg.context_len);
        let mut safe = true;
        for x in &windows {
            let (c, m, cut) = model.trace(x, &params)?.branch_margins(cfg);
            safe &= c > MIN_COS_MARGIN && m > MIN_READOUT_MODULUS && cut > MIN_CUT_DISTANCE;
        }
        if safe {
            return Ok((params, windows));
        }
    }
}

fn report<M: Regressor>(
    model: &M,
    names: Vec<String>,
    sizes: Vec<usize>,
    depth: Option<usize>,
    seed: u64,
    points: usize,
    mut next: impl FnMut(&mut ChaCha8Rng) -> Result<(M::Params, Vec<Vec<f64>>)>,
) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = alloc::vec![0.0f64; names.len()];
    for _ in 0..points {
        let (params, windows) = next(&mut rng)?;
        let targets: Vec<f64> = (0..windows.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let errs = group_errors(model, &params, &windows, &targets, FD_STEP)?;
        for (w, e) in worst.iter_mut().zip(errs) {
            *w = w.max(e);
        }
    }
    let max_rel_err = worst.iter().copied().fold(0.0, f64::max);
    Ok(GradCheckReport {
        model: String::from(model.name()),
        context_len: model.context_len(),
        depth,
        seed,
        points,
        step: FD_STEP,
        tolerance: TOLERANCE,
        groups: names
            .into_iter()
            .zip(sizes)
            .zip(worst)
            .map(|((name, len), max_rel_err)| GroupError { name, len, max_rel_err })
            .collect(),
        max_rel_err,
        passed: max_rel_err < TOLERANCE,
    })
}

/// Checks the phasor model at `points` branch-safe random points.
pub fn check_phasor(config: LpmConfig, seed: u64, points: usize) -> Result<GradCheckReport> {
    let model = Lpm::new(config)?;
    let template = LpmParams::zeros(&config);
    let sizes = template.groups().iter().map(Vec::len).collect();
    report(&model, template.group_names(), sizes, Some(config.depth), seed, points, |rng| {
        phasor_point(&model, rng)
    })
}

/// Checks the attention baseline at `points` freshly initialized random points.
pub fn check_attention(config: AttnConfig, seed: u64, points: usize) -> Result<GradCheckReport> {
    let model = AttentionModel::new(config)?;
    let template = AttnParams::init(&config, &mut ChaCha8Rng::seed_from_u64(0));
    let sizes = template.groups().iter().map(Vec::len).collect();
    report(&model, template.group_names(), sizes, None, seed, points, |rng| {
        let params = AttnParams::init(&config, rng);
        Ok((params, random_windows(rng, config.context_len)))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phasor_report_passes_and_names_every_group() {
        let r = check_phasor(LpmConfig::new(8, 2, true), 1, 2).unwrap();
        assert!(r.passed, "{r:?}");
        let names: Vec<&str> = r.groups.iter().map(|g| g.name.as_str()).collect();
        assert_eq!(names.len(), 5);
        assert_eq!(r.groups.iter().map(|g| g.len).sum::<usize>(), 40);
    }

    #[test]
    fn attention_report_passes() {
        let r = check_attention(AttnConfig::new(6), 2, 1).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.groups.iter().map(|g| g.len).sum::<usize>(), 3329);
    }
}
