//! Adam training, evaluation and autoregressive rollout for both models.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{AttentionModel, AttnGraph, AttnParams};
use crate::autodiff::{Tape, Var};
use crate::data::{DatasetSplit, SequenceSample};
use crate::error::{Error, Result};
use crate::math;
use crate::phasor::{encode, Encoding, Lpm, LpmParams, PhasorGraph};

/// Samples recorded on one tape while accumulating a gradient.
pub const GRADIENT_CHUNK: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    Mse,
    Mae,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// `None` trains on the full training set every step.
    pub batch_size: Option<usize>,
    /// Half-width of the uniform phase initialization.
    pub init_range: f64,
    pub seed: u64,
    pub loss: LossKind,
    pub adam: AdamConfig,
    /// Abort once the training loss exceeds this multiple of the initial loss.
    pub divergence_factor: f64,
}

impl TrainConfig {
    /// Learning rate 0.05, 100 full-batch epochs, phases drawn from `[-pi/10, pi/10]`.
    pub fn phasor() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            epochs: 100,
            batch_size: None,
            init_range: math::PI / 10.0,
            seed: 0,
            loss: LossKind::Mse,
            adam: AdamConfig::default(),
            divergence_factor: 1e3,
        }
    }

    /// Learning rate 1e-3, otherwise as [`TrainConfig::phasor`].
    pub fn attention() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            ..Self::phasor()
        }
    }

    /// Zero epochs is accepted and leaves the initialization untouched.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(String::from(m)));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive and finite");
        }
        if self.batch_size == Some(0) {
            return bad("batch size must be positive");
        }
        if !(self.init_range >= 0.0 && self.init_range.is_finite()) {
            return bad("init range must be finite and non-negative");
        }
        let a = &self.adam;
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.eps > 0.0) {
            return bad("adam betas must lie in [0, 1) and eps must be positive");
        }
        if self.divergence_factor.is_nan() || self.divergence_factor <= 1.0 {
            return bad("divergence factor must exceed 1");
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::phasor()
    }
}

/// First and second moments aligned with the parameter groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn new(groups: &[Vec<f64>]) -> Self {
        let zeros: Vec<Vec<f64>> = groups.iter().map(|g| vec![0.0; g.len()]).collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(
    params: &mut [Vec<f64>],
    grads: &[Vec<f64>],
    state: &mut AdamState,
    adam: &AdamConfig,
    learning_rate: f64,
) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::LengthMismatch {
            expected: params.len(),
            got: grads.len(),
        });
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.m) {
        if p.len() != g.len() || p.len() != m.len() {
            return Err(Error::LengthMismatch {
                expected: p.len(),
                got: g.len(),
            });
        }
    }
    if grads.iter().flatten().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite { op: "adam gradient" });
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - libm::pow(adam.beta1, t as f64);
    let c2 = 1.0 - libm::pow(adam.beta2, t as f64);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        for i in 0..p.len() {
            m[i] = adam.beta1 * m[i] + (1.0 - adam.beta1) * g[i];
            v[i] = adam.beta2 * v[i] + (1.0 - adam.beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= learning_rate * m_hat / (math::sqrt(v_hat) + adam.eps);
        }
    }
    Ok(())
}

/// A model trainable by [`train`].
pub trait Regressor {
    type Params: Clone;

    fn name(&self) -> &'static str;
    fn context_len(&self) -> usize;
    fn init(&self, init_range: f64, rng: &mut ChaCha8Rng) -> Self::Params;
    fn groups(&self, params: &Self::Params) -> Vec<Vec<f64>>;
    fn group_names(&self, params: &Self::Params) -> Vec<String>;
    fn params_from_groups(&self, groups: &[Vec<f64>]) -> Result<Self::Params>;
    fn predict(&self, x: &[f64], params: &Self::Params) -> Result<f64>;
    /// Records predictions for `windows` on `tape` as one stacked vector.
    fn record(&self, tape: &mut Tape, params: &Self::Params, windows: &[&[f64]]) -> Result<Var>;
    /// Decode scale used for the prediction on `x`, if the model has one.
    fn decode_scale(&self, _x: &[f64]) -> Option<f64> {
        None
    }
}

impl Regressor for Lpm {
    type Params = LpmParams;

    fn name(&self) -> &'static str {
        "phasor"
    }

    fn context_len(&self) -> usize {
        self.config().context_len
    }

    fn init(&self, init_range: f64, rng: &mut ChaCha8Rng) -> LpmParams {
        LpmParams::uniform(self.config(), init_range, rng)
    }

    fn groups(&self, params: &LpmParams) -> Vec<Vec<f64>> {
        params.groups()
    }

    fn group_names(&self, params: &LpmParams) -> Vec<String> {
        params.group_names()
    }

    fn params_from_groups(&self, groups: &[Vec<f64>]) -> Result<LpmParams> {
        LpmParams::from_groups(self.config(), groups)
    }

    fn predict(&self, x: &[f64], params: &LpmParams) -> Result<f64> {
        self.forward(x, params)
    }

    fn record(&self, tape: &mut Tape, params: &LpmParams, windows: &[&[f64]]) -> Result<Var> {
        let g = PhasorGraph::new(self, tape, params)?;
        g.predict_batch(tape, windows.iter().copied())
    }

    fn decode_scale(&self, x: &[f64]) -> Option<f64> {
        match self.config().encoding {
            Encoding::AmplitudeNorm => encode(x, Encoding::AmplitudeNorm).ok().map(|e| e.scale),
            Encoding::Tanh => None,
        }
    }
}

impl Regressor for AttentionModel {
    type Params = AttnParams;

    fn name(&self) -> &'static str {
        "attention"
    }

    fn context_len(&self) -> usize {
        self.config().context_len
    }

    fn init(&self, _init_range: f64, rng: &mut ChaCha8Rng) -> AttnParams {
        AttnParams::init(self.config(), rng)
    }

    fn groups(&self, params: &AttnParams) -> Vec<Vec<f64>> {
        params.groups()
    }

    fn group_names(&self, params: &AttnParams) -> Vec<String> {
        params.group_names()
    }

    fn params_from_groups(&self, groups: &[Vec<f64>]) -> Result<AttnParams> {
        AttnParams::from_groups(self.config(), groups)
    }

    fn predict(&self, x: &[f64], params: &AttnParams) -> Result<f64> {
        self.forward(x, params)
    }

    fn record(&self, tape: &mut Tape, params: &AttnParams, windows: &[&[f64]]) -> Result<Var> {
        let g = AttnGraph::new(self, tape, params)?;
        g.predict_batch(tape, windows.iter().copied())
    }
}

/// Mean loss over `samples` and its gradient, one tape per [`GRADIENT_CHUNK`] samples.
pub fn loss_and_grad<M: Regressor>(
    model: &M,
    params: &M::Params,
    samples: &[&SequenceSample],
    loss: LossKind,
) -> Result<(f64, Vec<Vec<f64>>)> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let total = samples.len() as f64;
    let mut value = 0.0;
    let mut grads: Vec<Vec<f64>> = model.groups(params).iter().map(|g| vec![0.0; g.len()]).collect();
    for chunk in samples.chunks(GRADIENT_CHUNK) {
        let mut tape = Tape::new();
        let windows: Vec<&[f64]> = chunk.iter().map(|s| s.context.as_slice()).collect();
        let targets: Vec<f64> = chunk.iter().map(|s| s.target).collect();
        let preds = model.record(&mut tape, params, &windows)?;
        let l = match loss {
            LossKind::Mse => tape.mse(preds, &targets)?,
            LossKind::Mae => tape.mae(preds, &targets)?,
        };
        let l = tape.scale(l, chunk.len() as f64 / total)?;
        value += tape.scalar(l);
        let g = tape.backward(l)?;
        for (acc, part) in grads.iter_mut().zip(&g.grads) {
            for (a, b) in acc.iter_mut().zip(&part.data) {
                *a += b;
            }
        }
    }
    Ok((value, grads))
}

/// Mean squared and absolute error over a sample set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub mae: f64,
    pub count: usize,
}

impl Metrics {
    pub fn from_pairs(pred: &[f64], target: &[f64]) -> Result<Self> {
        if pred.is_empty() {
            return Err(Error::EmptySamples);
        }
        if pred.len() != target.len() {
            return Err(Error::LengthMismatch {
                expected: target.len(),
                got: pred.len(),
            });
        }
        let n = pred.len() as f64;
        let (mut se, mut ae) = (0.0, 0.0);
        for (p, t) in pred.iter().zip(target) {
            se += (p - t) * (p - t);
            ae += (p - t).abs();
        }
        Ok(Metrics {
            mse: se / n,
            mae: ae / n,
            count: pred.len(),
        })
    }

    pub fn of(&self, kind: LossKind) -> f64 {
        match kind {
            LossKind::Mse => self.mse,
            LossKind::Mae => self.mae,
        }
    }
}

pub fn evaluate<M: Regressor>(model: &M, params: &M::Params, samples: &[SequenceSample]) -> Result<Metrics> {
    let preds = samples
        .iter()
        .map(|s| model.predict(&s.context, params))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<f64> = samples.iter().map(|s| s.target).collect();
    Metrics::from_pairs(&preds, &targets)
}

/// Metrics of a predictor that always outputs the training-target mean.
pub fn constant_mean_baseline(train: &[SequenceSample], samples: &[SequenceSample]) -> Result<Metrics> {
    if train.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mean = train.iter().map(|s| s.target).sum::<f64>() / train.len() as f64;
    let targets: Vec<f64> = samples.iter().map(|s| s.target).collect();
    Metrics::from_pairs(&vec![mean; targets.len()], &targets)
}

/// Convergence curve and final metrics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub model: String,
    pub num_params: usize,
    pub loss: LossKind,
    /// Training loss after `e` epochs; index 0 is the initialization.
    pub train_loss: Vec<f64>,
    pub train: Metrics,
    pub val: Option<Metrics>,
    pub test: Option<Metrics>,
    /// Filled in by callers that measure time.
    pub wall_clock_seconds: Option<f64>,
}

impl MetricsRecord {
    pub fn initial_loss(&self) -> f64 {
        self.train_loss[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.train_loss.last().unwrap_or(&f64::NAN)
    }
}

/// Series ids whose samples entered a gradient computation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradientAudit {
    pub series: BTreeSet<usize>,
    pub samples: usize,
}

impl GradientAudit {
    fn record(&mut self, batch: &[&SequenceSample], forbidden: &BTreeSet<usize>) -> Result<()> {
        for s in batch {
            if forbidden.contains(&s.series_id) {
                return Err(Error::TestSampleInTraining);
            }
            self.series.insert(s.series_id);
        }
        self.samples += batch.len();
        Ok(())
    }
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainOutcome<P> {
    pub params: P,
    pub metrics: MetricsRecord,
    pub audit: GradientAudit,
}

/// Trains on `data.train`; validation and test samples are only evaluated after the last epoch.
pub fn train<M: Regressor>(model: &M, data: &DatasetSplit, config: &TrainConfig) -> Result<TrainOutcome<M::Params>> {
    config.validate()?;
    if data.train.is_empty() {
        return Err(Error::EmptySamples);
    }
    if data.context_len != model.context_len() {
        return Err(Error::LengthMismatch {
            expected: model.context_len(),
            got: data.context_len,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = model.init(config.init_range, &mut rng);
    train_from(model, init, data, config, &mut rng)
}

/// [`train`] from explicit initial parameters.
pub fn train_from<M: Regressor>(
    model: &M,
    init: M::Params,
    data: &DatasetSplit,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<TrainOutcome<M::Params>> {
    config.validate()?;
    let held_out: BTreeSet<usize> = data.test.iter().map(|s| s.series_id).collect();
    let mut audit = GradientAudit::default();
    let mut order: Vec<&SequenceSample> = data.train.iter().collect();
    let full_loss = |p: &M::Params| -> Result<f64> { Ok(evaluate(model, p, &data.train)?.of(config.loss)) };

    let mut groups = model.groups(&init);
    let mut params = init;
    let mut adam = AdamState::new(&groups);
    let initial = full_loss(&params)?;
    if !initial.is_finite() {
        return Err(Error::NonFiniteLoss { epoch: 0 });
    }
    let limit = config.divergence_factor * initial;
    let mut curve = vec![initial];

    for epoch in 1..=config.epochs {
        let batch = config.batch_size.unwrap_or(order.len()).min(order.len());
        if batch < order.len() {
            order.shuffle(rng);
        }
        for chunk in order.chunks(batch) {
            audit.record(chunk, &held_out)?;
            let (_, grads) = loss_and_grad(model, &params, chunk, config.loss).map_err(|e| match e {
                Error::NonFinite { .. } => Error::NonFiniteLoss { epoch },
                other => other,
            })?;
            if grads.iter().flatten().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient { epoch });
            }
            adam_step(&mut groups, &grads, &mut adam, &config.adam, config.learning_rate)?;
            params = model.params_from_groups(&groups)?;
        }
        let loss = full_loss(&params).map_err(|e| match e {
            Error::NonFinite { .. } => Error::NonFiniteLoss { epoch },
            other => other,
        })?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        if loss > limit {
            return Err(Error::Diverged { epoch, loss, limit });
        }
        curve.push(loss);
    }

    let optional = |s: &[SequenceSample]| -> Result<Option<Metrics>> {
        if s.is_empty() {
            Ok(None)
        } else {
            evaluate(model, &params, s).map(Some)
        }
    };
    let metrics = MetricsRecord {
        model: String::from(model.name()),
        num_params: groups.iter().map(Vec::len).sum(),
        loss: config.loss,
        train_loss: curve,
        train: evaluate(model, &params, &data.train)?,
        val: optional(&data.val)?,
        test: optional(&data.test)?,
        wall_clock_seconds: None,
    };
    Ok(TrainOutcome { params, metrics, audit })
}

/// Autoregressive continuation.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub predictions: Vec<f64>,
    /// Decode scale used at each step, when the model has one.
    pub scales: Vec<f64>,
    /// Why the rollout stopped early, if it did.
    pub truncated: Option<Error>,
}

/// Predicts, appends the prediction and slides the window, `steps` times.
pub fn rollout<M: Regressor>(model: &M, params: &M::Params, context: &[f64], steps: usize) -> Result<Rollout> {
    if steps == 0 {
        return Err(Error::InvalidConfig(String::from("rollout needs at least one step")));
    }
    if context.len() != model.context_len() {
        return Err(Error::LengthMismatch {
            expected: model.context_len(),
            got: context.len(),
        });
    }
    let mut window = context.to_vec();
    let mut out = Rollout {
        predictions: Vec::with_capacity(steps),
        scales: Vec::new(),
        truncated: None,
    };
    for _ in 0..steps {
        let y = match model.predict(&window, params) {
            Ok(y) if y.is_finite() => y,
            Ok(_) => {
                out.truncated = Some(Error::NonFinite { op: "rollout" });
                break;
            }
            Err(e @ Error::NonFinite { .. }) => {
                out.truncated = Some(e);
                break;
            }
            Err(e) => return Err(e),
        };
        if let Some(s) = model.decode_scale(&window) {
            out.scales.push(s);
        }
        out.predictions.push(y);
        window.remove(0);
        window.push(y);
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
