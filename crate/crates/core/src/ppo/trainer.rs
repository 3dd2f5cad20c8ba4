use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::normalizer::RunningNorm;
use super::policy::{sample_action, PolicyParams};
use super::update::{ppo_update, RolloutBuffer, UpdateMetrics};
use super::TrainConfig;
use crate::env::Environment;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "latticeworm-checkpoint v1";

const MAX_CONSECUTIVE_SKIPS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: usize,
    pub episode_return: f64,
    pub max_step_reward: f64,
    pub length: usize,
    pub unstable: bool,
    pub final_distance: f64,
}

/// Everything needed to continue training bit-identically from an episode
/// boundary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub config: TrainConfig,
    pub params: PolicyParams,
    pub adam: Adam,
    pub normalizer: RunningNorm,
    pub rng: ChaCha8Rng,
    pub buffer: RolloutBuffer,
    pub observation: Vec<f64>,
    pub episodes_done: usize,
    pub total_steps: usize,
    pub consecutive_skips: usize,
    pub history: Vec<EpisodeStats>,
    pub metrics: Vec<UpdateMetrics>,
    pub env_state: serde_json::Value,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_vec(self)?).map_err(Error::at(&tmp))?;
        std::fs::rename(&tmp, path).map_err(Error::at(path))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(Error::at(path))?;
        let ckpt: Self = serde_json::from_slice(&bytes)?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown checkpoint format {:?}", ckpt.format)));
        }
        Ok(ckpt)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Running {
    ret: f64,
    max_reward: f64,
    length: usize,
    unstable: bool,
    distance: f64,
}

/// Collect/update loop over one environment.
#[derive(Debug, Clone)]
pub struct Trainer<E> {
    env: E,
    config: TrainConfig,
    params: PolicyParams,
    adam: Adam,
    normalizer: RunningNorm,
    rng: ChaCha8Rng,
    buffer: RolloutBuffer,
    observation: Vec<f64>,
    episodes_done: usize,
    total_steps: usize,
    consecutive_skips: usize,
    running: Running,
    history: Vec<EpisodeStats>,
    metrics: Vec<UpdateMetrics>,
}

impl<E: Environment> Trainer<E> {
    pub fn new(mut env: E, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = PolicyParams::init(env.observation_dim(), env.action_dim(), &config.hidden, &mut rng);
        let mut normalizer = RunningNorm::new(env.observation_dim());
        let raw = env.reset()?;
        normalizer.update(&raw);
        let observation = normalizer.normalize(&raw);
        Ok(Self {
            adam: Adam::new(params.n_params(), config.learning_rate),
            buffer: RolloutBuffer::new(config.n_steps),
            env,
            params,
            normalizer,
            rng,
            observation,
            episodes_done: 0,
            total_steps: 0,
            consecutive_skips: 0,
            running: Running::default(),
            history: Vec::new(),
            metrics: Vec::new(),
            config,
        })
    }

    /// Continues from a checkpoint; `env` must be freshly constructed from the
    /// same configuration.
    pub fn from_checkpoint(mut env: E, ckpt: Checkpoint) -> Result<Self> {
        if ckpt.params.obs_dim() != env.observation_dim() || ckpt.params.act_dim() != env.action_dim() {
            return Err(Error::Checkpoint(format!(
                "checkpoint dimensions ({}, {}) do not match the environment ({}, {})",
                ckpt.params.obs_dim(),
                ckpt.params.act_dim(),
                env.observation_dim(),
                env.action_dim()
            )));
        }
        env.restore(&ckpt.env_state)?;
        Ok(Self {
            env,
            config: ckpt.config,
            params: ckpt.params,
            adam: ckpt.adam,
            normalizer: ckpt.normalizer,
            rng: ckpt.rng,
            buffer: ckpt.buffer,
            observation: ckpt.observation,
            episodes_done: ckpt.episodes_done,
            total_steps: ckpt.total_steps,
            consecutive_skips: ckpt.consecutive_skips,
            running: Running::default(),
            history: ckpt.history,
            metrics: ckpt.metrics,
        })
    }

    /// Only valid between episodes.
    pub fn checkpoint(&self) -> Result<Checkpoint> {
        if self.running.length != 0 {
            return Err(Error::Checkpoint("checkpoints are only taken between episodes".into()));
        }
        Ok(Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            config: self.config.clone(),
            params: self.params.clone(),
            adam: self.adam.clone(),
            normalizer: self.normalizer.clone(),
            rng: self.rng.clone(),
            buffer: self.buffer.clone(),
            observation: self.observation.clone(),
            episodes_done: self.episodes_done,
            total_steps: self.total_steps,
            consecutive_skips: self.consecutive_skips,
            history: self.history.clone(),
            metrics: self.metrics.clone(),
            env_state: self.env.snapshot(),
        })
    }

    pub fn env(&self) -> &E {
        &self.env
    }

    pub fn env_mut(&mut self) -> &mut E {
        &mut self.env
    }

    pub fn into_env(self) -> E {
        self.env
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn params(&self) -> &PolicyParams {
        &self.params
    }

    pub fn normalizer(&self) -> &RunningNorm {
        &self.normalizer
    }

    pub fn history(&self) -> &[EpisodeStats] {
        &self.history
    }

    pub fn metrics(&self) -> &[UpdateMetrics] {
        &self.metrics
    }

    pub fn episodes_done(&self) -> usize {
        self.episodes_done
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    /// Mean action for a raw observation, without touching the normalizer.
    pub fn act_deterministic(&self, raw_observation: &[f64]) -> Vec<f64> {
        self.params.forward(&self.normalizer.normalize(raw_observation)).mean
    }

    pub fn train(&mut self) -> Result<()> {
        self.train_with(|_| Ok(()))
    }

    /// Trains until `total_episodes` episodes are done, calling `after_episode`
    /// at every episode boundary.
    pub fn train_with<F: FnMut(&Self) -> Result<()>>(&mut self, mut after_episode: F) -> Result<()> {
        while self.episodes_done < self.config.total_episodes {
            if self.collect_step()? {
                after_episode(self)?;
            }
        }
        Ok(())
    }

    /// One environment step, plus an update when the rollout is full. Returns
    /// whether an episode just ended.
    pub fn collect_step(&mut self) -> Result<bool> {
        let out = self.params.forward(&self.observation);
        if out.mean.iter().any(|m| !m.is_finite()) || !out.value.is_finite() {
            return Err(Error::Training(format!(
                "non-finite policy output at step {} (value {})",
                self.total_steps, out.value
            )));
        }
        let (action, log_prob) = sample_action(&out.mean, &out.std, &mut self.rng);
        let tr = self.env.step(&action)?;
        self.total_steps += 1;

        let r = &mut self.running;
        r.ret += tr.reward;
        r.max_reward = if r.length == 0 { tr.reward } else { r.max_reward.max(tr.reward) };
        r.length += 1;
        r.unstable |= tr.unstable;
        r.distance = tr.distance;

        let obs = std::mem::take(&mut self.observation);
        self.buffer.push(obs, action, log_prob, tr.reward, out.value, tr.done);

        let next_raw = if tr.done {
            self.history.push(EpisodeStats {
                episode: self.episodes_done,
                episode_return: r.ret,
                max_step_reward: r.max_reward,
                length: r.length,
                unstable: r.unstable,
                final_distance: r.distance,
            });
            self.episodes_done += 1;
            self.running = Running::default();
            self.env.reset()?
        } else {
            tr.observation
        };
        self.normalizer.update(&next_raw);
        self.observation = self.normalizer.normalize(&next_raw);

        if self.buffer.is_full() {
            let bootstrap = if tr.done { 0.0 } else { self.params.value(&self.observation) };
            self.buffer.compute_advantages(bootstrap, self.config.discount_gamma, self.config.gae_lambda);
            let mut m = ppo_update(&mut self.params, &mut self.adam, &self.buffer, &self.config, &mut self.rng);
            m.update = self.metrics.len();
            if m.skipped {
                self.consecutive_skips += 1;
                if self.consecutive_skips > MAX_CONSECUTIVE_SKIPS {
                    return Err(Error::Training(format!(
                        "{} consecutive updates had non-finite losses (last at step {})",
                        self.consecutive_skips, self.total_steps
                    )));
                }
            } else {
                self.consecutive_skips = 0;
            }
            if !self.params.is_finite() {
                return Err(Error::Training("non-finite parameters after update".into()));
            }
            self.metrics.push(m);
            self.buffer.clear();
        }
        Ok(tr.done)
    }
}
