//! Phasor states, shift gates, the DFT mixer and the stacked phasor model.
//!
//! A context window is encoded onto the torus as `z_t = e^{i phi_t}`. Each
//! block applies a pre-shift, the unitary DFT and a post-shift
//! (`S(post) F S(pre)`); between blocks the state is pulled back through the
//! phase fold `arcsin(sin(arg z))` and re-lifted to unit modulus. The
//! prediction is the decoded phase of one readout thread.

mod graph;

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use graph::{GateVars, PhasorGraph};

use crate::error::{Error, Result};
use crate::fft::DftPlan;
use crate::math;
use crate::tensor::ComplexVec;

/// Window maxima below this are treated as an all-zero window.
pub const ZERO_WINDOW_EPS: f64 = 1e-12;

/// Token threads in the ambient space `C^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasorState {
    pub z: ComplexVec,
}

impl PhasorState {
    pub fn from_phases(phases: &[f64]) -> Self {
        PhasorState {
            z: ComplexVec::from_phases(phases),
        }
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.z.norm()
    }

    pub fn phases(&self) -> Vec<f64> {
        self.z.args()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    /// `phi_t = x_t / max|x| * pi/2`.
    #[default]
    AmplitudeNorm,
    /// `phi_t = pi * tanh(x_t)`. Experimental: decoded with a clamped `atanh`.
    Tanh,
}

/// Encoded window: phasor state, phases and the decode scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub state: PhasorState,
    pub phases: Vec<f64>,
    pub scale: f64,
}

pub fn encode(x: &[f64], encoding: Encoding) -> Result<Encoded> {
    if x.is_empty() {
        return Err(Error::InvalidConfig("empty context window".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { op: "encode" });
    }
    let (phases, scale): (Vec<f64>, f64) = match encoding {
        Encoding::AmplitudeNorm => {
            let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let scale = if m < ZERO_WINDOW_EPS { 1.0 } else { m };
            (x.iter().map(|v| v / scale * math::FRAC_PI_2).collect(), scale)
        }
        Encoding::Tanh => (x.iter().map(|&v| math::PI * math::tanh(v)).collect(), 1.0),
    };
    Ok(Encoded {
        state: PhasorState::from_phases(&phases),
        phases,
        scale,
    })
}

/// Inverse of [`encode`] for a single phase.
pub fn decode(phi: f64, scale: f64, encoding: Encoding) -> f64 {
    match encoding {
        Encoding::AmplitudeNorm => phi * scale / math::FRAC_PI_2,
        Encoding::Tanh => {
            let c = crate::autodiff::ATANH_CLAMP;
            math::atanh((phi / math::PI).clamp(-c, c))
        }
    }
}

/// Per-thread phase rotation `S(theta) = diag(e^{i theta_t})`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ShiftGate {
    pub theta: Vec<f64>,
}

impl ShiftGate {
    pub fn zeros(len: usize) -> Self {
        ShiftGate {
            theta: alloc::vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

impl From<Vec<f64>> for ShiftGate {
    fn from(theta: Vec<f64>) -> Self {
        ShiftGate { theta }
    }
}

pub fn shift(state: &PhasorState, gate: &ShiftGate) -> Result<PhasorState> {
    if state.len() != gate.len() {
        return Err(Error::LengthMismatch {
            expected: state.len(),
            got: gate.len(),
        });
    }
    let mut z = state.z.clone();
    for (t, &theta) in gate.theta.iter().enumerate() {
        let (s, c) = math::sin_cos(theta);
        let (a, b) = (z.re[t], z.im[t]);
        z.re[t] = a * c - b * s;
        z.im[t] = a * s + b * c;
    }
    Ok(PhasorState { z })
}

/// Unitary DFT across the token threads.
pub fn dft_mix(state: &PhasorState) -> PhasorState {
    dft_mix_with(&DftPlan::new(state.len()), state)
}

pub fn dft_mix_with(plan: &DftPlan, state: &PhasorState) -> PhasorState {
    PhasorState {
        z: plan.forward(&state.z),
    }
}

/// Folds every thread's phase into `[-pi/2, pi/2]` and re-lifts to unit modulus.
///
/// The modulus of the incoming state is discarded.
pub fn pullback(state: &PhasorState) -> PhasorState {
    let phases: Vec<f64> = state.phases().into_iter().map(math::fold_phase).collect();
    PhasorState::from_phases(&phases)
}

/// `S(post) F S(pre)`.
pub fn block(state: &PhasorState, pre: &ShiftGate, post: &ShiftGate) -> Result<PhasorState> {
    block_with(&DftPlan::new(state.len()), state, pre, post)
}

pub fn block_with(
    plan: &DftPlan,
    state: &PhasorState,
    pre: &ShiftGate,
    post: &ShiftGate,
) -> Result<PhasorState> {
    let shifted = shift(state, pre)?;
    shift(&dft_mix_with(plan, &shifted), post)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LpmConfig {
    #[serde(rename = "T")]
    pub context_len: usize,
    #[serde(rename = "D")]
    pub depth: usize,
    pub readout_shift: bool,
    pub readout_thread: usize,
    pub encoding: Encoding,
    pub pullback_between_blocks: bool,
}

impl LpmConfig {
    /// Amplitude encoding, readout from thread 0, pull-back between blocks.
    pub fn new(context_len: usize, depth: usize, readout_shift: bool) -> Self {
        LpmConfig {
            context_len,
            depth,
            readout_shift,
            readout_thread: 0,
            encoding: Encoding::AmplitudeNorm,
            pullback_between_blocks: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.context_len == 0 {
            return Err(Error::InvalidConfig("context length must be positive".into()));
        }
        if self.depth == 0 {
            return Err(Error::InvalidConfig("depth must be positive".into()));
        }
        if self.readout_thread >= self.context_len {
            return Err(Error::InvalidConfig(format!(
                "readout thread {} outside 0..{}",
                self.readout_thread, self.context_len
            )));
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        count_params(self)
    }
}

/// `(2D + 1) T` with a readout shift, `2 D T` without.
pub fn count_params(config: &LpmConfig) -> usize {
    let per_block = 2 * config.context_len;
    config.depth * per_block + if config.readout_shift { config.context_len } else { 0 }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BlockParams {
    pub pre: ShiftGate,
    pub post: ShiftGate,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LpmParams {
    pub blocks: Vec<BlockParams>,
    pub readout: Option<ShiftGate>,
}

impl LpmParams {
    pub fn zeros(config: &LpmConfig) -> Self {
        Self::from_fn(config, || 0.0)
    }

    /// Every angle drawn uniformly from `[-range, range]`.
    pub fn uniform<R: Rng + ?Sized>(config: &LpmConfig, range: f64, rng: &mut R) -> Self {
        Self::from_fn(config, || rng.random_range(-range..=range))
    }

    fn from_fn(config: &LpmConfig, mut f: impl FnMut() -> f64) -> Self {
        let t = config.context_len;
        let mut gate = || ShiftGate {
            theta: (0..t).map(|_| f()).collect(),
        };
        let blocks = (0..config.depth)
            .map(|_| {
                let pre = gate();
                let post = gate();
                BlockParams { pre, post }
            })
            .collect();
        let readout = config.readout_shift.then(gate);
        LpmParams { blocks, readout }
    }

    pub fn len(&self) -> usize {
        self.blocks.iter().map(|b| b.pre.len() + b.post.len()).sum::<usize>()
            + self.readout.as_ref().map_or(0, ShiftGate::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parameter groups in tape order: `pre_1, post_1, ..., pre_D, post_D, readout`.
    pub fn groups(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = self
            .blocks
            .iter()
            .flat_map(|b| [b.pre.theta.clone(), b.post.theta.clone()])
            .collect();
        if let Some(r) = &self.readout {
            out.push(r.theta.clone());
        }
        out
    }

    /// Human-readable names matching [`LpmParams::groups`].
    pub fn group_names(&self) -> Vec<alloc::string::String> {
        let mut out: Vec<_> = (0..self.blocks.len())
            .flat_map(|i| [format!("block{}.pre", i + 1), format!("block{}.post", i + 1)])
            .collect();
        if self.readout.is_some() {
            out.push("readout".into());
        }
        out
    }

    /// Inverse of [`LpmParams::groups`] for a given config.
    pub fn from_groups(config: &LpmConfig, groups: &[Vec<f64>]) -> Result<Self> {
        let expected = 2 * config.depth + usize::from(config.readout_shift);
        if groups.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: groups.len(),
            });
        }
        for g in groups {
            if g.len() != config.context_len {
                return Err(Error::LengthMismatch {
                    expected: config.context_len,
                    got: g.len(),
                });
            }
        }
        let blocks = groups[..2 * config.depth]
            .chunks(2)
            .map(|p| BlockParams {
                pre: p[0].clone().into(),
                post: p[1].clone().into(),
            })
            .collect();
        let readout = config
            .readout_shift
            .then(|| groups[2 * config.depth].clone().into());
        Ok(LpmParams { blocks, readout })
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.groups().concat()
    }

    /// Checks the parameter layout against `config`.
    pub fn check(&self, config: &LpmConfig) -> Result<()> {
        let mismatch = |what: &str| Err(Error::InvalidConfig(format!("parameters do not match config: {what}")));
        if self.blocks.len() != config.depth {
            return mismatch("depth");
        }
        if self.readout.is_some() != config.readout_shift {
            return mismatch("readout shift");
        }
        let t = config.context_len;
        let gates_ok = self.blocks.iter().all(|b| b.pre.len() == t && b.post.len() == t)
            && self.readout.as_ref().is_none_or(|r| r.len() == t);
        if !gates_ok {
            return mismatch("gate length");
        }
        if self.len() != count_params(config) {
            return mismatch("parameter count");
        }
        Ok(())
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    pub encoded: Encoded,
    /// Output of every block, before any pull-back.
    pub block_outputs: Vec<PhasorState>,
    /// State after the optional readout shift.
    pub final_state: PhasorState,
    pub phase_out: f64,
    pub prediction: f64,
}

impl Trace {
    /// Smallest `|cos phi|` over the phases fed into pull-backs (fold kinks),
    /// smallest modulus at the readout thread, and distance of the readout
    /// phase from the `+-pi` branch cut.
    pub fn branch_margins(&self, config: &LpmConfig) -> (f64, f64, f64) {
        let mut cos_margin = f64::INFINITY;
        if config.pullback_between_blocks {
            for s in &self.block_outputs[..self.block_outputs.len() - 1] {
                for phi in s.phases() {
                    cos_margin = cos_margin.min(math::cos(phi).abs());
                }
            }
        }
        let (a, b) = self.final_state.z.get(config.readout_thread);
        let modulus = math::hypot(a, b);
        let cut = math::PI - self.phase_out.abs();
        (cos_margin, modulus, cut)
    }
}

/// Phasor model bound to a config, with a cached DFT plan.
#[derive(Debug, Clone)]
pub struct Lpm {
    config: LpmConfig,
    plan: DftPlan,
}

impl Lpm {
    pub fn new(config: LpmConfig) -> Result<Self> {
        config.validate()?;
        Ok(Lpm {
            plan: DftPlan::new(config.context_len),
            config,
        })
    }

    pub fn config(&self) -> &LpmConfig {
        &self.config
    }

    pub fn plan(&self) -> &DftPlan {
        &self.plan
    }

    pub fn forward(&self, x: &[f64], params: &LpmParams) -> Result<f64> {
        Ok(self.trace(x, params)?.prediction)
    }

    pub fn trace(&self, x: &[f64], params: &LpmParams) -> Result<Trace> {
        let cfg = &self.config;
        params.check(cfg)?;
        if x.len() != cfg.context_len {
            return Err(Error::LengthMismatch {
                expected: cfg.context_len,
                got: x.len(),
            });
        }
        let encoded = encode(x, cfg.encoding)?;
        let mut state = encoded.state.clone();
        let mut block_outputs = Vec::with_capacity(cfg.depth);
        for (i, b) in params.blocks.iter().enumerate() {
            if i > 0 && cfg.pullback_between_blocks {
                state = pullback(&state);
            }
            state = block_with(&self.plan, &state, &b.pre, &b.post)?;
            block_outputs.push(state.clone());
        }
        if let Some(r) = &params.readout {
            state = shift(&state, r)?;
        }
        let (a, b) = state.z.get(cfg.readout_thread);
        let phase_out = math::atan2(b, a);
        let prediction = decode(phase_out, encoded.scale, cfg.encoding);
        if !prediction.is_finite() {
            return Err(Error::NonFinite { op: "lpm_forward" });
        }
        Ok(Trace {
            encoded,
            block_outputs,
            final_state: state,
            phase_out,
            prediction,
        })
    }
}

/// One-shot forward pass: encode, stacked blocks, readout.
pub fn lpm_forward(x: &[f64], params: &LpmParams, config: &LpmConfig) -> Result<f64> {
    Lpm::new(*config)?.forward(x, params)
}
