//! Clipped-surrogate policy-gradient learner with manual backprop.

mod adam;
mod gae;
mod mlp;
mod normalizer;
mod policy;
mod trainer;
mod update;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adam::{clip_grad_norm, Adam};
pub use gae::{compute_gae, normalize_advantages};
pub use mlp::{orthogonal, MlpCache, MlpShape};
pub use normalizer::RunningNorm;
pub use policy::{entropy, log_prob, sample_action, PolicyOutput, PolicyParams, LOG_STD_MAX, LOG_STD_MIN};
pub use trainer::{Checkpoint, EpisodeStats, Trainer, CHECKPOINT_FORMAT};
pub use update::{minibatch_loss, ppo_update, LossTerms, RolloutBuffer, UpdateMetrics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub n_steps: usize,
    pub learning_rate: f64,
    pub discount_gamma: f64,
    pub gae_lambda: f64,
    pub clip_range: f64,
    pub n_epochs: usize,
    pub minibatch_size: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub total_episodes: usize,
    pub seed: u64,
    pub hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_steps: 2,
            learning_rate: 3e-4,
            discount_gamma: 0.99,
            gae_lambda: 0.95,
            clip_range: 0.2,
            n_epochs: 10,
            minibatch_size: 64,
            value_coef: 0.5,
            entropy_coef: 0.0,
            max_grad_norm: 0.5,
            total_episodes: 1000,
            seed: 0,
            hidden: vec![64, 64],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 || self.n_epochs == 0 || self.minibatch_size == 0 {
            return Err(Error::invalid("n_steps, n_epochs and minibatch_size must be >= 1"));
        }
        if !(self.discount_gamma > 0.0 && self.discount_gamma <= 1.0) {
            return Err(Error::invalid("discount_gamma must be in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::invalid("gae_lambda must be in [0, 1]"));
        }
        if !(self.clip_range > 0.0) {
            return Err(Error::invalid("clip_range must be > 0"));
        }
        if !(self.learning_rate > 0.0) || !(self.max_grad_norm > 0.0) {
            return Err(Error::invalid("learning_rate and max_grad_norm must be > 0"));
        }
        if !(self.value_coef >= 0.0) || !(self.entropy_coef >= 0.0) {
            return Err(Error::invalid("loss coefficients must be >= 0"));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::invalid("hidden layer sizes must be non-empty and positive"));
        }
        Ok(())
    }
}

/// One row per update.
pub fn write_metrics_csv(path: &Path, metrics: &[UpdateMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for m in metrics {
        w.serialize(m)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { discount_gamma: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { gae_lambda: 1.5, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { clip_range: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { n_steps: 0, ..Default::default() }.validate().is_err());
    }
}
