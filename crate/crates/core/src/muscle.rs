//! Activation-to-force mapping and use-dependent growth of the force ceiling.
//!
//! Between episodes each muscle's ceiling is multiplied by
//! `alpha = 1 + beta |strain| + gamma |force|`, using the peak strain and the
//! force of the episode just finished, and capped at twice its initial value.
//! Forces are carried in newtons everywhere except inside [`adaptation_factor`],
//! where the force coefficient is applied per millinewton.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MILLINEWTONS_PER_NEWTON: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptConfig {
    /// Coefficient on peak absolute axial strain.
    pub beta: f64,
    /// Coefficient on episode force, per millinewton.
    pub gamma: f64,
    /// Initial force ceiling, N.
    pub lambda_0: f64,
    pub adaptation_enabled: bool,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self { beta: 1e-6, gamma: 4e-8, lambda_0: 2.0, adaptation_enabled: true }
    }
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) || !(self.gamma >= 0.0) {
            return Err(Error::invalid("beta and gamma must be >= 0"));
        }
        if !(self.lambda_0 > 0.0) {
            return Err(Error::invalid("lambda_0 must be > 0"));
        }
        Ok(())
    }

    pub fn lambda_cap(&self) -> f64 {
        2.0 * self.lambda_0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuscleState {
    pub muscle_id: usize,
    /// Current force ceiling, N.
    pub lambda: f64,
    /// Peak |axial strain| over the previous episode.
    pub last_episode_strain: f64,
    /// Force produced in the previous episode, N.
    pub last_episode_force: f64,
    pub activation: f64,
}

impl MuscleState {
    pub fn new(muscle_id: usize, config: &AdaptConfig) -> Self {
        Self {
            muscle_id,
            lambda: config.lambda_0,
            last_episode_strain: 0.0,
            last_episode_force: 0.0,
            activation: 0.0,
        }
    }

    pub fn force(&self) -> f64 {
        muscle_force(self.activation, self.lambda)
    }
}

/// `F = A * lambda`, with the activation clamped into `[0, 1]`.
pub fn muscle_force(activation: f64, lambda: f64) -> f64 {
    let a = clamp_activation(activation);
    a * lambda
}

pub(crate) fn clamp_activation(activation: f64) -> f64 {
    if (0.0..=1.0).contains(&activation) {
        activation
    } else {
        log::warn!("activation {activation} outside [0, 1]; clamping");
        if activation.is_nan() {
            0.0
        } else {
            activation.clamp(0.0, 1.0)
        }
    }
}

/// `1 + beta |strain| + gamma |force in mN|`.
pub fn adaptation_factor(strain: f64, force_newtons: f64, config: &AdaptConfig) -> f64 {
    1.0 + config.beta * strain.abs() + config.gamma * (force_newtons * MILLINEWTONS_PER_NEWTON).abs()
}

/// Next force ceiling from the previous episode's use.
pub fn adapt(state: &MuscleState, config: &AdaptConfig) -> f64 {
    if !config.adaptation_enabled {
        return state.lambda;
    }
    let alpha = adaptation_factor(state.last_episode_strain, state.last_episode_force, config);
    (alpha * state.lambda).min(config.lambda_cap())
}

/// Stores the episode's peak |strain| and its force. An empty trace (the
/// episode ended before any control step completed) records no use at all.
pub fn record_episode_use(state: &mut MuscleState, strain_trace: &[f64], force_this_episode: f64) {
    if strain_trace.is_empty() {
        state.last_episode_strain = 0.0;
        state.last_episode_force = 0.0;
        return;
    }
    state.last_episode_strain = strain_trace.iter().fold(0.0, |m, e| m.max(e.abs()));
    state.last_episode_force = force_this_episode;
}

/// The muscles of one robot, sharing one adaptation config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuscleBank {
    pub config: AdaptConfig,
    pub muscles: Vec<MuscleState>,
}

impl MuscleBank {
    pub fn new(n_muscles: usize, config: AdaptConfig) -> Self {
        Self { muscles: (0..n_muscles).map(|i| MuscleState::new(i, &config)).collect(), config }
    }

    pub fn len(&self) -> usize {
        self.muscles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.muscles.is_empty()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.muscles.iter().map(|m| m.lambda).collect()
    }

    /// Records use and applies the adaptation law to every muscle.
    pub fn end_episode(&mut self, strain_traces: &[Vec<f64>], forces: &[f64]) {
        debug_assert_eq!(strain_traces.len(), self.muscles.len());
        debug_assert_eq!(forces.len(), self.muscles.len());
        for ((m, trace), force) in self.muscles.iter_mut().zip(strain_traces).zip(forces) {
            record_episode_use(m, trace, *force);
            m.lambda = adapt(m, &self.config);
        }
    }
}
