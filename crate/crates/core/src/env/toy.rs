//! One muscle pulling a mass against a linear spring to a target offset.
//!
//! The static displacement is `x = A * lambda / k`. Useful for checking that
//! the learner solves a task whose optimum is known in closed form.

use super::{reward, Environment, RewardConfig, Transition};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ToyReachEnv {
    pub stiffness: f64,
    pub lambda: f64,
    pub target: f64,
    pub steps_per_episode: usize,
    pub reward: RewardConfig,
    step: usize,
    position: f64,
    previous_action: f64,
}

impl ToyReachEnv {
    /// k = 100 N/m, lambda = 2 N, target 12 mm, one control step per episode.
    pub fn new() -> Self {
        Self::with_target(0.012)
    }

    pub fn with_target(target: f64) -> Self {
        Self {
            stiffness: 100.0,
            lambda: 2.0,
            target,
            steps_per_episode: 1,
            reward: RewardConfig::default(),
            step: 0,
            position: 0.0,
            previous_action: 0.0,
        }
    }

    /// Activation that places the mass exactly on the target.
    pub fn optimal_activation(&self) -> f64 {
        (self.target * self.stiffness / self.lambda).clamp(0.0, 1.0)
    }

    pub fn position(&self) -> f64 {
        self.position
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.position / self.target, self.previous_action, self.lambda, self.target]
    }
}

impl Default for ToyReachEnv {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for ToyReachEnv {
    fn observation_dim(&self) -> usize {
        4
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn reset(&mut self) -> Result<Vec<f64>> {
        self.step = 0;
        self.position = 0.0;
        self.previous_action = 0.0;
        Ok(self.observation())
    }

    fn step(&mut self, action: &[f64]) -> Result<Transition> {
        if action.len() != 1 {
            return Err(Error::invalid(format!("action has length {}, expected 1", action.len())));
        }
        let a = if action[0].is_nan() { 0.0 } else { action[0].clamp(0.0, 1.0) };
        self.position = a * self.lambda / self.stiffness;
        self.previous_action = a;
        self.step += 1;
        let n = (self.position - self.target).abs();
        Ok(Transition {
            observation: self.observation(),
            action: vec![a],
            reward: reward(n, &self.reward),
            done: self.step >= self.steps_per_episode,
            unstable: false,
            terminus: [self.position, 0.0, 0.0],
            distance: n,
        })
    }
}
