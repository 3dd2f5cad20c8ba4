//! Diagonal-Gaussian actor and scalar critic sharing one flat parameter vector.
//!
//! Layout: `[policy network | log_std | value network]`.

use std::f64::consts::PI;
use std::ops::Range;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::mlp::{MlpCache, MlpShape};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub policy_shape: MlpShape,
    pub value_shape: MlpShape,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PolicyOutput {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub value: f64,
    pub policy_cache: MlpCache,
    pub value_cache: MlpCache,
}

impl PolicyParams {
    pub fn zeros(obs_dim: usize, act_dim: usize, hidden: &[usize]) -> Self {
        let policy_shape = MlpShape::new(obs_dim, hidden, act_dim);
        let value_shape = MlpShape::new(obs_dim, hidden, 1);
        let n = policy_shape.n_params() + act_dim + value_shape.n_params();
        Self { policy_shape, value_shape, theta: vec![0.0; n] }
    }

    /// Orthogonal init: gain sqrt(2) on hidden layers, 0.01 on the action
    /// means, 1 on the value output; log_std starts at 0.
    pub fn init<R: Rng + ?Sized>(obs_dim: usize, act_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut p = Self::zeros(obs_dim, act_dim, hidden);
        let pi = p.policy_shape.init_orthogonal(rng, 2f64.sqrt(), 0.01);
        let vf = p.value_shape.init_orthogonal(rng, 2f64.sqrt(), 1.0);
        let (r_pi, r_vf) = (p.policy_range(), p.value_range());
        p.theta[r_pi].copy_from_slice(&pi);
        p.theta[r_vf].copy_from_slice(&vf);
        p
    }

    pub fn obs_dim(&self) -> usize {
        self.policy_shape.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.policy_shape.output_dim()
    }

    pub fn n_params(&self) -> usize {
        self.theta.len()
    }

    pub fn policy_range(&self) -> Range<usize> {
        0..self.policy_shape.n_params()
    }

    pub fn log_std_range(&self) -> Range<usize> {
        let s = self.policy_shape.n_params();
        s..s + self.act_dim()
    }

    pub fn value_range(&self) -> Range<usize> {
        self.log_std_range().end..self.theta.len()
    }

    pub fn log_std(&self) -> &[f64] {
        &self.theta[self.log_std_range()]
    }

    pub fn clamp_log_std(&mut self) {
        let r = self.log_std_range();
        self.theta[r].iter_mut().for_each(|s| *s = s.clamp(LOG_STD_MIN, LOG_STD_MAX));
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|p| p.is_finite())
    }

    pub fn forward(&self, obs: &[f64]) -> PolicyOutput {
        let policy_cache = self.policy_shape.forward(&self.theta[self.policy_range()], obs);
        let value_cache = self.value_shape.forward(&self.theta[self.value_range()], obs);
        PolicyOutput {
            mean: policy_cache.output().to_vec(),
            std: self.log_std().iter().map(|s| s.exp()).collect(),
            value: value_cache.output()[0],
            policy_cache,
            value_cache,
        }
    }

    pub fn value(&self, obs: &[f64]) -> f64 {
        self.value_shape.forward(&self.theta[self.value_range()], obs).output()[0]
    }

    /// Backprop of `d_mean`, `d_log_std` and `d_value` into `grad`.
    pub fn backward(&self, out: &PolicyOutput, d_mean: &[f64], d_log_std: &[f64], d_value: f64, grad: &mut [f64]) {
        let (r_pi, r_ls, r_vf) = (self.policy_range(), self.log_std_range(), self.value_range());
        self.policy_shape.backward(&self.theta[r_pi.clone()], &out.policy_cache, d_mean, &mut grad[r_pi]);
        for (g, d) in grad[r_ls].iter_mut().zip(d_log_std) {
            *g += d;
        }
        self.value_shape.backward(&self.theta[r_vf.clone()], &out.value_cache, &[d_value], &mut grad[r_vf]);
    }
}

/// Sum of per-dimension Gaussian log densities.
pub fn log_prob(action: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    action
        .iter()
        .zip(mean.iter().zip(log_std))
        .map(|(a, (m, ls))| {
            let z = (a - m) / ls.exp();
            -0.5 * z * z - ls - 0.5 * (2.0 * PI).ln()
        })
        .sum()
}

pub fn entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| 0.5 + 0.5 * (2.0 * PI).ln() + ls).sum()
}

/// Unclipped Gaussian sample and its log density.
pub fn sample_action<R: Rng + ?Sized>(mean: &[f64], std: &[f64], rng: &mut R) -> (Vec<f64>, f64) {
    let action: Vec<f64> =
        mean.iter().zip(std).map(|(m, s)| m + s * rng.sample::<f64, _>(StandardNormal)).collect();
    let log_std: Vec<f64> = std.iter().map(|s| s.ln()).collect();
    let lp = log_prob(&action, mean, &log_std);
    (action, lp)
}
