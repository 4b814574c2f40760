//! Recording the phasor forward pass on a [`Tape`].

use alloc::vec::Vec;

use super::{encode, Encoding, Lpm, LpmParams};
use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::math;
use crate::tensor::Shape;

/// Parameter leaves, in [`LpmParams::groups`] order.
#[derive(Debug, Clone)]
pub struct GateVars {
    pub blocks: Vec<(Var, Var)>,
    pub readout: Option<Var>,
}

/// Registered gates plus their rotations `e^{i theta}`, shared by every
/// sample recorded on the same tape.
#[derive(Debug, Clone)]
pub struct PhasorGraph<'m> {
    model: &'m Lpm,
    pub vars: GateVars,
    rotations: Vec<(Var, Var)>,
    readout_rotation: Option<Var>,
}

impl<'m> PhasorGraph<'m> {
    pub fn new(model: &'m Lpm, tape: &mut Tape, params: &LpmParams) -> Result<Self> {
        params.check(model.config())?;
        let mut blocks = Vec::with_capacity(params.blocks.len());
        let mut rotations = Vec::with_capacity(params.blocks.len());
        for b in &params.blocks {
            let pre = tape.param_vec(&b.pre.theta)?;
            let post = tape.param_vec(&b.post.theta)?;
            blocks.push((pre, post));
        }
        let readout = match &params.readout {
            Some(r) => Some(tape.param_vec(&r.theta)?),
            None => None,
        };
        for &(pre, post) in &blocks {
            rotations.push((tape.polar(pre)?, tape.polar(post)?));
        }
        let readout_rotation = match readout {
            Some(r) => Some(tape.polar(r)?),
            None => None,
        };
        Ok(PhasorGraph {
            model,
            vars: GateVars { blocks, readout },
            rotations,
            readout_rotation,
        })
    }

    /// Records one window and returns its `1 x 1` prediction node.
    pub fn predict(&self, tape: &mut Tape, x: &[f64]) -> Result<Var> {
        let cfg = self.model.config();
        if x.len() != cfg.context_len {
            return Err(crate::Error::LengthMismatch {
                expected: cfg.context_len,
                got: x.len(),
            });
        }
        let enc = encode(x, cfg.encoding)?;
        let mut z = tape.constant_complex(enc.state.z, Shape::vector(cfg.context_len))?;
        for (i, &(pre, post)) in self.rotations.iter().enumerate() {
            if i > 0 && cfg.pullback_between_blocks {
                let raw = tape.arg(z)?;
                let folded = tape.fold(raw)?;
                z = tape.polar(folded)?;
            }
            let shifted = tape.mul(z, pre)?;
            let mixed = tape.dft(shifted)?;
            z = tape.mul(mixed, post)?;
        }
        if let Some(r) = self.readout_rotation {
            z = tape.mul(z, r)?;
        }
        let thread = tape.element(z, cfg.readout_thread)?;
        let phase = tape.arg(thread)?;
        match cfg.encoding {
            Encoding::AmplitudeNorm => tape.scale(phase, enc.scale / math::FRAC_PI_2),
            Encoding::Tanh => {
                let ratio = tape.scale(phase, 1.0 / math::PI)?;
                tape.atanh(ratio)
            }
        }
    }

    /// Predictions for every window gathered into one `1 x n` node.
    pub fn predict_batch<'a, I>(&self, tape: &mut Tape, windows: I) -> Result<Var>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let preds = windows
            .into_iter()
            .map(|x| self.predict(tape, x))
            .collect::<Result<Vec<_>>>()?;
        tape.stack(&preds)
    }
}
