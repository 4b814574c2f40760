//! Versioned JSON checkpoints for both model families.

use std::path::Path;

use phasor_core::attention::{AttentionModel, AttnConfig, AttnParams};
use phasor_core::data::SequenceSample;
use phasor_core::phasor::{Lpm, LpmConfig, LpmParams};
use phasor_core::train::{self, Metrics, Rollout};
use serde::{Deserialize, Serialize};

use crate::error::{LpmError, Result};
use crate::json::{self, FORMAT_VERSION};

/// Model configuration and parameters, tagged by `model`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Checkpoint {
    Phasor { config: LpmConfig, params: LpmParams },
    Attention { config: AttnConfig, params: AttnParams },
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format_version: u32,
    #[serde(flatten)]
    body: Checkpoint,
}

impl Checkpoint {
    pub fn num_params(&self) -> usize {
        match self {
            Checkpoint::Phasor { params, .. } => params.len(),
            Checkpoint::Attention { params, .. } => params.len(),
        }
    }

    pub fn context_len(&self) -> usize {
        match self {
            Checkpoint::Phasor { config, .. } => config.context_len,
            Checkpoint::Attention { config, .. } => config.context_len,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Checkpoint::Phasor { config, params } => {
                config.validate()?;
                params.check(config)?;
            }
            Checkpoint::Attention { config, params } => {
                config.validate()?;
                params.check(config)?;
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, samples: &[SequenceSample]) -> Result<Metrics> {
        Ok(match self {
            Checkpoint::Phasor { config, params } => train::evaluate(&Lpm::new(*config)?, params, samples)?,
            Checkpoint::Attention { config, params } => {
                train::evaluate(&AttentionModel::new(*config)?, params, samples)?
            }
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(match self {
            Checkpoint::Phasor { config, params } => Lpm::new(*config)?.forward(x, params)?,
            Checkpoint::Attention { config, params } => AttentionModel::new(*config)?.forward(x, params)?,
        })
    }

    pub fn rollout(&self, context: &[f64], steps: usize) -> Result<Rollout> {
        Ok(match self {
            Checkpoint::Phasor { config, params } => train::rollout(&Lpm::new(*config)?, params, context, steps)?,
            Checkpoint::Attention { config, params } => {
                train::rollout(&AttentionModel::new(*config)?, params, context, steps)?
            }
        })
    }

    pub fn to_json(&self) -> String {
        json::to_string(&Envelope {
            format_version: FORMAT_VERSION,
            body: self.clone(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        json::write_text(path, &self.to_json())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let env: Envelope = json::read(path)?;
        if env.format_version != FORMAT_VERSION {
            return Err(LpmError::Version {
                found: env.format_version,
                expected: FORMAT_VERSION,
            });
        }
        env.body
            .validate()
            .map_err(|e| LpmError::format(path, e.to_string()))?;
        Ok(env.body)
    }
}
