use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::{clip_grad_norm, Adam};
use super::gae::{compute_gae, normalize_advantages};
use super::policy::{entropy, log_prob, PolicyParams};
use super::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutBuffer {
    pub capacity: usize,
    /// Normalized observations as seen by the policy.
    pub observations: Vec<Vec<f64>>,
    /// Raw (unclipped) Gaussian samples.
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            observations: Vec::with_capacity(capacity),
            actions: Vec::with_capacity(capacity),
            log_probs: Vec::with_capacity(capacity),
            rewards: Vec::with_capacity(capacity),
            values: Vec::with_capacity(capacity),
            dones: Vec::with_capacity(capacity),
            advantages: Vec::new(),
            returns: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.len() >= self.capacity
    }

    pub fn push(&mut self, obs: Vec<f64>, action: Vec<f64>, log_prob: f64, reward: f64, value: f64, done: bool) {
        self.observations.push(obs);
        self.actions.push(action);
        self.log_probs.push(log_prob);
        self.rewards.push(reward);
        self.values.push(value);
        self.dones.push(done);
    }

    pub fn compute_advantages(&mut self, bootstrap_value: f64, discount_gamma: f64, gae_lambda: f64) {
        let (a, r) = compute_gae(&self.rewards, &self.values, &self.dones, bootstrap_value, discount_gamma, gae_lambda);
        self.advantages = a;
        self.returns = r;
    }

    pub fn clear(&mut self) {
        *self = Self::new(self.capacity);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossTerms {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub total: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

/// Clipped surrogate loss on one minibatch, accumulating its gradient into
/// `grad` when given. `advantages` are already normalized for this minibatch.
pub fn minibatch_loss(
    params: &PolicyParams,
    buffer: &RolloutBuffer,
    indices: &[usize],
    advantages: &[f64],
    config: &TrainConfig,
    mut grad: Option<&mut [f64]>,
) -> LossTerms {
    let b = indices.len() as f64;
    let eps = config.clip_range;
    let log_std = params.log_std().to_vec();
    let ent = entropy(&log_std);
    let mut t = LossTerms { entropy: ent, ..Default::default() };
    for (k, &i) in indices.iter().enumerate() {
        let out = params.forward(&buffer.observations[i]);
        let action = &buffer.actions[i];
        let logp = log_prob(action, &out.mean, &log_std);
        let log_ratio = logp - buffer.log_probs[i];
        let ratio = log_ratio.exp();
        let adv = advantages[k];
        let unclipped = ratio * adv;
        let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
        t.policy_loss -= unclipped.min(clipped) / b;
        let err = out.value - buffer.returns[i];
        t.value_loss += err * err / b;
        if (ratio - 1.0).abs() > eps {
            t.clip_fraction += 1.0 / b;
        }
        t.approx_kl += ((ratio - 1.0) - log_ratio) / b;

        if let Some(g) = grad.as_deref_mut() {
            // d(-min(rA, clip(r)A))/dr is -A on the unclipped branch, 0 otherwise
            let d_ratio = if unclipped <= clipped { -adv / b } else { 0.0 };
            let d_logp = d_ratio * ratio;
            let mut d_mean = vec![0.0; action.len()];
            let mut d_log_std = vec![0.0; action.len()];
            for j in 0..action.len() {
                let var = (2.0 * log_std[j]).exp();
                let diff = action[j] - out.mean[j];
                d_mean[j] = d_logp * diff / var;
                d_log_std[j] = d_logp * (diff * diff / var - 1.0) - config.entropy_coef / b;
            }
            let d_value = config.value_coef * 2.0 * err / b;
            params.backward(&out, &d_mean, &d_log_std, d_value, g);
        }
    }
    t.total = t.policy_loss + config.value_coef * t.value_loss - config.entropy_coef * t.entropy;
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateMetrics {
    pub update: usize,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub grad_norm: f64,
    pub skipped: bool,
}

/// `n_epochs` passes of shuffled minibatch steps. A non-finite loss or
/// gradient anywhere rolls back the whole update.
pub fn ppo_update<R: Rng + ?Sized>(
    params: &mut PolicyParams,
    adam: &mut Adam,
    buffer: &RolloutBuffer,
    config: &TrainConfig,
    rng: &mut R,
) -> UpdateMetrics {
    let n = buffer.len();
    let mb = config.minibatch_size.min(n).max(1);
    let saved = (params.clone(), adam.clone());
    let mut m = UpdateMetrics {
        update: 0,
        policy_loss: 0.0,
        value_loss: 0.0,
        entropy: 0.0,
        clip_fraction: 0.0,
        approx_kl: 0.0,
        grad_norm: 0.0,
        skipped: false,
    };
    let mut count = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..config.n_epochs {
        order.shuffle(rng);
        for chunk in order.chunks(mb) {
            let mut adv: Vec<f64> = chunk.iter().map(|&i| buffer.advantages[i]).collect();
            normalize_advantages(&mut adv);
            let mut grad = vec![0.0; params.n_params()];
            let t = minibatch_loss(params, buffer, chunk, &adv, config, Some(&mut grad));
            if !t.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                log::warn!("non-finite loss {} in update; skipping", t.total);
                (*params, *adam) = saved;
                m.skipped = true;
                return m;
            }
            m.grad_norm = clip_grad_norm(&mut grad, config.max_grad_norm);
            adam.step(&mut params.theta, &grad);
            params.clamp_log_std();
            m.policy_loss += t.policy_loss;
            m.value_loss += t.value_loss;
            m.entropy += t.entropy;
            m.clip_fraction += t.clip_fraction;
            m.approx_kl += t.approx_kl;
            count += 1.0;
        }
    }
    if count > 0.0 {
        m.policy_loss /= count;
        m.value_loss /= count;
        m.entropy /= count;
        m.clip_fraction /= count;
        m.approx_kl /= count;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_sample_buffer(params: &PolicyParams, obs: Vec<f64>, action: Vec<f64>, log_prob_shift: f64) -> RolloutBuffer {
        let out = params.forward(&obs);
        let lp = log_prob(&action, &out.mean, params.log_std()) - log_prob_shift;
        let mut buf = RolloutBuffer::new(1);
        buf.push(obs, action, lp, 1.0, out.value, true);
        buf.compute_advantages(0.0, 0.99, 0.95);
        buf
    }

    #[test]
    fn identity_ratio_policy_loss_is_minus_mean_advantage() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = PolicyParams::init(3, 2, &[4], &mut rng);
        let buf = one_sample_buffer(&p, vec![0.1, 0.2, 0.3], vec![0.5, -0.5], 0.0);
        let t = minibatch_loss(&p, &buf, &[0], &[0.7], &TrainConfig::default(), None);
        assert!((t.policy_loss + 0.7).abs() < 1e-12);
        assert_eq!(t.clip_fraction, 0.0);
        assert!(t.approx_kl.abs() < 1e-15);
    }

    #[test]
    fn clipped_branch_contributes_constant_and_no_policy_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = PolicyParams::init(3, 2, &[4], &mut rng);
        let cfg = TrainConfig { value_coef: 0.0, ..Default::default() };
        // old log prob lowered so ratio = 1 + 2 eps
        let shift = (1.0 + 2.0 * cfg.clip_range).ln();
        let buf = one_sample_buffer(&p, vec![0.4, -0.2, 1.0], vec![0.3, 0.1], shift);
        let a = 1.3;
        let mut grad = vec![0.0; p.n_params()];
        let t = minibatch_loss(&p, &buf, &[0], &[a], &cfg, Some(&mut grad));
        assert!((t.policy_loss + (1.0 + cfg.clip_range) * a).abs() < 1e-12);
        assert_eq!(t.clip_fraction, 1.0);
        assert!(grad.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut p = PolicyParams::init(4, 2, &[5, 5], &mut rng);
        for (i, ls) in p.log_std_range().enumerate() {
            p.theta[ls] = -0.3 + 0.2 * i as f64;
        }
        let cfg = TrainConfig { entropy_coef: 0.01, ..Default::default() };
        let mut buf = RolloutBuffer::new(3);
        for k in 0..3 {
            let obs: Vec<f64> = (0..4).map(|j| ((k * 4 + j) as f64 * 0.7).sin()).collect();
            let out = p.forward(&obs);
            let action = vec![out.mean[0] + 0.3 - 0.2 * k as f64, out.mean[1] - 0.4];
            // small shift keeps every ratio inside the clip range
            let lp = log_prob(&action, &out.mean, p.log_std()) + 0.05 * (k as f64 - 1.0);
            buf.push(obs, action, lp, k as f64 * 0.5, out.value, k == 2);
        }
        buf.compute_advantages(0.0, 0.99, 0.95);
        let idx = [0, 1, 2];
        let adv = [0.8, -1.1, 0.3];
        let mut grad = vec![0.0; p.n_params()];
        minibatch_loss(&p, &buf, &idx, &adv, &cfg, Some(&mut grad));
        let h = 1e-5;
        for i in 0..p.n_params() {
            let mut q = p.clone();
            q.theta[i] += h;
            let up = minibatch_loss(&q, &buf, &idx, &adv, &cfg, None).total;
            q.theta[i] -= 2.0 * h;
            let down = minibatch_loss(&q, &buf, &idx, &adv, &cfg, None).total;
            let fd = (up - down) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-4 * fd.abs().max(1e-5), "param {i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn non_finite_loss_rolls_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = PolicyParams::init(2, 1, &[3], &mut rng);
        let mut buf = one_sample_buffer(&p, vec![0.0, 1.0], vec![0.2], 0.0);
        buf.returns[0] = f64::NAN;
        let mut adam = Adam::new(p.n_params(), 3e-4);
        let before = p.clone();
        let m = ppo_update(&mut p, &mut adam, &buf, &TrainConfig::default(), &mut rng);
        assert!(m.skipped);
        assert_eq!(p, before);
        assert_eq!(adam.t, 0);
    }
}
