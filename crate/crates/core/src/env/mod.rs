//! Episodic reaching environment around the lattice simulation.
//!
//! Observation layout (flattened, in this order):
//! 1. positions of the observation nodes, `3 * n_points` (m)
//! 2. velocities of the same nodes, `3 * n_points` (m/s)
//! 3. previous applied activations, `n_muscles`
//! 4. force ceilings, `n_muscles` (N)
//! 5. target position, 3 (m)
//!
//! The default observation nodes are both end nodes of every muscle rod
//! followed by the terminus.

mod toy;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{build_lattice, terminus_of, LatticeSpec, LatticeSystem, TargetPrism};
use crate::muscle::{clamp_activation, muscle_force, AdaptConfig, MuscleBank};
use crate::rod::{Actuation, NodeRef, SimConfig, Vec3};

pub use toy::ToyReachEnv;

/// Anything the learner can be trained against.
pub trait Environment {
    fn observation_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn reset(&mut self) -> Result<Vec<f64>>;
    fn step(&mut self, action: &[f64]) -> Result<Transition>;

    /// State carried across episodes, for checkpoints taken between episodes.
    fn snapshot(&self) -> serde_json::Value {
        serde_json::Value::Null
    }

    fn restore(&mut self, _state: &serde_json::Value) -> Result<()> {
        Ok(())
    }
}

/// One control step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Vec<f64>,
    /// Activations actually applied (clipped, or held from the first step).
    pub action: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub unstable: bool,
    pub terminus: [f64; 3],
    /// Terminus-to-target distance; NaN on an unstable step.
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub bonus_radius_d: f64,
    pub inner_bonus: f64,
    pub outer_bonus: f64,
    pub instability_penalty: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { bonus_radius_d: 0.001, inner_bonus: 2.0, outer_bonus: 0.5, instability_penalty: -2.0 }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bonus_radius_d > 0.0) {
            return Err(Error::invalid("bonus_radius_d must be > 0"));
        }
        Ok(())
    }
}

/// Two-tier bonus: `inner` for `n <= d`, `outer` for `d < n <= 2d`, else 0.
pub fn bonus(n: f64, config: &RewardConfig) -> f64 {
    let d = config.bonus_radius_d;
    if n <= d {
        config.inner_bonus
    } else if n <= 2.0 * d {
        config.outer_bonus
    } else {
        0.0
    }
}

/// `-n^2 + bonus(n)` with `n` in meters.
pub fn reward(n: f64, config: &RewardConfig) -> f64 {
    -n * n + bonus(n, config)
}

pub fn distance_to_target(lattice: &LatticeSystem, target: &Vec3) -> f64 {
    (lattice.terminus() - target).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub control_steps_per_episode: usize,
    /// Simulated seconds per control step.
    pub control_dt: f64,
    /// Hold the first step's activation for the whole episode.
    pub action_hold: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self { control_steps_per_episode: 10, control_dt: 0.1, action_hold: true }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.control_steps_per_episode == 0 {
            return Err(Error::invalid("control_steps_per_episode must be >= 1"));
        }
        if !(self.control_dt > 0.0) {
            return Err(Error::invalid("control_dt must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationNodes {
    /// Muscle end nodes plus the terminus.
    #[default]
    MuscleEnds,
    /// Every node of every rod plus the terminus.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub lattice: LatticeSpec,
    pub sim: SimConfig,
    pub adapt: AdaptConfig,
    pub reward: RewardConfig,
    pub episode: EpisodeConfig,
    pub prism: TargetPrism,
    pub observation_nodes: ObservationNodes,
}

impl Default for EnvConfig {
    fn default() -> Self {
        let lattice = LatticeSpec::default();
        Self {
            prism: TargetPrism::default_for(&lattice),
            lattice,
            sim: SimConfig::default(),
            adapt: AdaptConfig::default(),
            reward: RewardConfig::default(),
            episode: EpisodeConfig::default(),
            observation_nodes: ObservationNodes::default(),
        }
    }
}

impl EnvConfig {
    /// Reduced lattice (3 columns, 2 levels, 10 structural elements), cheap
    /// enough for many-episode runs on one core. Each episode is a single held
    /// activation simulated for 0.5 s, long enough for the transient to settle.
    pub fn desk_scale() -> Self {
        let lattice = LatticeSpec { n_columns: 3, n_levels: 2, structural_elements: 10, ..Default::default() };
        Self {
            prism: TargetPrism::default_for(&lattice),
            lattice,
            sim: SimConfig { dt: 1e-4, ..Default::default() },
            episode: EpisodeConfig { control_steps_per_episode: 1, control_dt: 0.5, action_hold: true },
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lattice.validate()?;
        self.sim.validate()?;
        self.adapt.validate()?;
        self.reward.validate()?;
        self.episode.validate()?;
        self.prism.validate()
    }

    /// Physics substeps per control step, `round(control_dt / dt)`, at least 1.
    pub fn substeps(&self) -> usize {
        ((self.episode.control_dt / self.sim.dt).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObservationLayout {
    pub n_points: usize,
    pub n_muscles: usize,
}

impl ObservationLayout {
    pub fn len(&self) -> usize {
        6 * self.n_points + 2 * self.n_muscles + 3
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn positions(&self) -> std::ops::Range<usize> {
        0..3 * self.n_points
    }

    pub fn velocities(&self) -> std::ops::Range<usize> {
        3 * self.n_points..6 * self.n_points
    }

    pub fn previous_actions(&self) -> std::ops::Range<usize> {
        let s = 6 * self.n_points;
        s..s + self.n_muscles
    }

    pub fn force_ceilings(&self) -> std::ops::Range<usize> {
        let s = 6 * self.n_points + self.n_muscles;
        s..s + self.n_muscles
    }

    pub fn target(&self) -> std::ops::Range<usize> {
        let s = 6 * self.n_points + 2 * self.n_muscles;
        s..s + 3
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub node_positions: Vec<f64>,
    pub node_velocities: Vec<f64>,
    pub previous_actions: Vec<f64>,
    pub force_ceilings: Vec<f64>,
    pub target: [f64; 3],
}

impl Observation {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(
            self.node_positions.len() * 2 + self.previous_actions.len() * 2 + 3,
        );
        out.extend_from_slice(&self.node_positions);
        out.extend_from_slice(&self.node_velocities);
        out.extend_from_slice(&self.previous_actions);
        out.extend_from_slice(&self.force_ceilings);
        out.extend_from_slice(&self.target);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }
}

/// Per-episode summary row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub episode: usize,
    pub seed: u64,
    pub target_index: usize,
    pub adaptation: bool,
    pub episode_return: f64,
    pub max_step_reward: f64,
    pub final_distance: f64,
    pub unstable: bool,
    pub steps: usize,
}

/// Per-episode, per-muscle adaptation row: the ceiling in force during the
/// episode, the force produced, and the mean applied activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuscleEpisodeRow {
    pub episode: usize,
    pub muscle_id: usize,
    pub lambda: f64,
    pub force: f64,
    pub activation: f64,
    pub peak_strain: f64,
}

#[derive(Debug, Clone)]
struct EpisodeProgress {
    step: usize,
    done: bool,
    hook_pending: bool,
    held_action: Option<Vec<f64>>,
    strain_traces: Vec<Vec<f64>>,
    peak_forces: Vec<f64>,
    activation_sums: Vec<f64>,
    episode_return: f64,
    max_step_reward: f64,
    final_distance: f64,
    unstable: bool,
}

impl EpisodeProgress {
    fn new(n_muscles: usize) -> Self {
        Self {
            step: 0,
            done: false,
            hook_pending: false,
            held_action: None,
            strain_traces: vec![Vec::new(); n_muscles],
            peak_forces: vec![0.0; n_muscles],
            activation_sums: vec![0.0; n_muscles],
            episode_return: 0.0,
            max_step_reward: f64::NEG_INFINITY,
            final_distance: f64::NAN,
            unstable: false,
        }
    }
}

/// The lattice worm reaching task.
#[derive(Debug, Clone)]
pub struct LatticeEnv {
    config: EnvConfig,
    pristine: LatticeSystem,
    lattice: LatticeSystem,
    muscles: MuscleBank,
    observed: Vec<NodeRef>,
    seed: u64,
    target_index: usize,
    target: Vec3,
    previous_actions: Vec<f64>,
    last_observation: Observation,
    progress: EpisodeProgress,
    episode_index: usize,
    episode_log: Vec<EpisodeRow>,
    muscle_log: Vec<MuscleEpisodeRow>,
}

impl LatticeEnv {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let pristine = build_lattice(&config.lattice)?;
        let n_muscles = pristine.muscles.len();
        let observed = match config.observation_nodes {
            ObservationNodes::MuscleEnds => pristine.muscle_end_nodes(),
            ObservationNodes::All => pristine.all_nodes(),
        };
        let target = config.prism.corner(1)?;
        let mut env = Self {
            muscles: MuscleBank::new(n_muscles, config.adapt),
            lattice: pristine.clone(),
            pristine,
            observed,
            seed: 0,
            target_index: 1,
            target,
            previous_actions: vec![0.0; n_muscles],
            last_observation: Observation {
                node_positions: vec![],
                node_velocities: vec![],
                previous_actions: vec![],
                force_ceilings: vec![],
                target: [0.0; 3],
            },
            progress: EpisodeProgress::new(n_muscles),
            episode_index: 0,
            episode_log: Vec::new(),
            muscle_log: Vec::new(),
            config,
        };
        env.last_observation = env.observe();
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn lattice(&self) -> &LatticeSystem {
        &self.lattice
    }

    pub fn muscles(&self) -> &MuscleBank {
        &self.muscles
    }

    /// Restores saved ceilings, e.g. from a checkpoint.
    pub fn set_muscles(&mut self, bank: MuscleBank) -> Result<()> {
        if bank.len() != self.muscles.len() {
            return Err(Error::invalid("muscle bank size does not match the lattice"));
        }
        self.muscles = bank;
        self.last_observation = self.observe();
        Ok(())
    }

    pub fn n_muscles(&self) -> usize {
        self.muscles.len()
    }

    pub fn layout(&self) -> ObservationLayout {
        ObservationLayout { n_points: self.observed.len() + 1, n_muscles: self.n_muscles() }
    }

    pub fn target(&self) -> Vec3 {
        self.target
    }

    pub fn target_index(&self) -> usize {
        self.target_index
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn episode_index(&self) -> usize {
        self.episode_index
    }

    pub fn episode_log(&self) -> &[EpisodeRow] {
        &self.episode_log
    }

    pub fn muscle_log(&self) -> &[MuscleEpisodeRow] {
        &self.muscle_log
    }

    pub fn is_done(&self) -> bool {
        self.progress.done
    }

    /// Selects the seed label and target corner used by subsequent resets.
    pub fn configure(&mut self, seed: u64, target_index: usize) -> Result<()> {
        self.target = self.config.prism.corner(target_index)?;
        self.seed = seed;
        self.target_index = target_index;
        Ok(())
    }

    /// Rest configuration, zero velocities, previous actions zeroed. Force
    /// ceilings carry over; a finished episode's adaptation hook runs first.
    pub fn reset(&mut self, seed: u64, target_index: usize) -> Result<Observation> {
        self.configure(seed, target_index)?;
        if self.progress.hook_pending {
            self.end_of_episode_hook();
        }
        self.lattice = self.pristine.clone();
        self.progress = EpisodeProgress::new(self.n_muscles());
        self.previous_actions = vec![0.0; self.n_muscles()];
        self.last_observation = self.observe();
        Ok(self.last_observation.clone())
    }

    fn observe(&self) -> Observation {
        let n = self.observed.len() + 1;
        let mut node_positions = Vec::with_capacity(3 * n);
        let mut node_velocities = Vec::with_capacity(3 * n);
        for node in &self.observed {
            node_positions.extend_from_slice(self.lattice.system.position(*node).as_slice());
            node_velocities.extend_from_slice(self.lattice.system.velocity(*node).as_slice());
        }
        let terminus = self.lattice.terminus();
        let sys = &self.lattice.system;
        let k = self.lattice.structural_rods.len() as f64;
        let terminus_velocity: Vec3 =
            self.lattice.structural_rods.iter().map(|&r| *sys.rod(r).node_velocities.last().unwrap()).sum::<Vec3>() / k;
        node_positions.extend_from_slice(terminus.as_slice());
        node_velocities.extend_from_slice(terminus_velocity.as_slice());
        Observation {
            node_positions,
            node_velocities,
            previous_actions: self.previous_actions.clone(),
            force_ceilings: self.muscles.lambdas(),
            target: [self.target.x, self.target.y, self.target.z],
        }
    }

    /// Applies activations for one control step.
    pub fn step_control(&mut self, action: &[f64]) -> Result<(Observation, Transition)> {
        let n_muscles = self.n_muscles();
        if action.len() != n_muscles {
            return Err(Error::invalid(format!(
                "action has length {}, expected {n_muscles}",
                action.len()
            )));
        }
        if self.progress.done {
            return Err(Error::invalid("step called on a finished episode; call reset first"));
        }
        let clipped: Vec<f64> = action.iter().map(|a| if a.is_nan() { 0.0 } else { a.clamp(0.0, 1.0) }).collect();
        let applied = if self.config.episode.action_hold {
            self.progress.held_action.get_or_insert(clipped).clone()
        } else {
            clipped
        };

        let mut actuation = Vec::with_capacity(n_muscles);
        for (i, (a, layout)) in applied.iter().zip(&self.lattice.muscles).enumerate() {
            let m = &mut self.muscles.muscles[i];
            m.activation = clamp_activation(*a);
            let force = muscle_force(m.activation, m.lambda);
            self.progress.peak_forces[i] = self.progress.peak_forces[i].max(force);
            self.progress.activation_sums[i] += m.activation;
            actuation.push(Actuation { rod: layout.rod, force });
        }

        let mut sim = self.config.sim;
        sim.substeps_per_control = self.config.substeps();
        self.lattice.system.step_n(&sim, &actuation, sim.substeps_per_control);
        self.progress.step += 1;
        self.previous_actions = applied.clone();

        let unstable = self.lattice.system.detect_instability();
        let (reward, distance, terminus) = if unstable {
            (self.config.reward.instability_penalty, f64::NAN, [f64::NAN; 3])
        } else {
            let t = terminus_of(&self.lattice.system, &self.lattice.structural_rods);
            let n = (t - self.target).norm();
            for (trace, strain) in self.progress.strain_traces.iter_mut().zip(self.lattice.muscle_strains()) {
                trace.push(strain);
            }
            (reward(n, &self.config.reward), n, [t.x, t.y, t.z])
        };
        let done = unstable || self.progress.step >= self.config.episode.control_steps_per_episode;

        let p = &mut self.progress;
        p.episode_return += reward;
        p.max_step_reward = p.max_step_reward.max(reward);
        p.final_distance = distance;
        p.unstable = unstable;
        p.done = done;
        p.hook_pending = done;

        if !unstable {
            self.last_observation = self.observe();
        }
        let observation = self.last_observation.clone();
        let transition = Transition {
            observation: observation.to_vec(),
            action: applied,
            reward,
            done,
            unstable,
            terminus,
            distance,
        };
        Ok((observation, transition))
    }

    /// Logs the finished episode and, when enabled, adapts every ceiling.
    pub fn end_of_episode_hook(&mut self) {
        if !self.progress.hook_pending {
            return;
        }
        let p = &self.progress;
        let steps = p.step.max(1) as f64;
        self.episode_log.push(EpisodeRow {
            episode: self.episode_index,
            seed: self.seed,
            target_index: self.target_index,
            adaptation: self.config.adapt.adaptation_enabled,
            episode_return: p.episode_return,
            max_step_reward: p.max_step_reward,
            final_distance: p.final_distance,
            unstable: p.unstable,
            steps: p.step,
        });
        for (i, m) in self.muscles.muscles.iter().enumerate() {
            let trace = &p.strain_traces[i];
            self.muscle_log.push(MuscleEpisodeRow {
                episode: self.episode_index,
                muscle_id: m.muscle_id,
                lambda: m.lambda,
                force: p.peak_forces[i],
                activation: p.activation_sums[i] / steps,
                peak_strain: trace.iter().fold(0.0, |a: f64, e| a.max(e.abs())),
            });
        }
        if self.config.adapt.adaptation_enabled {
            let traces = p.strain_traces.clone();
            let forces = p.peak_forces.clone();
            self.muscles.end_episode(&traces, &forces);
        }
        self.progress.hook_pending = false;
        self.episode_index += 1;
    }

    /// Appends any pending episode to the logs (for use after the last step).
    pub fn flush(&mut self) {
        self.end_of_episode_hook();
    }

    /// Replaces the logs with ones saved by an earlier process, for resuming.
    pub fn restore_logs(&mut self, episodes: Vec<EpisodeRow>, muscles: Vec<MuscleEpisodeRow>) -> Result<()> {
        if episodes.len() != self.episode_index {
            return Err(Error::Checkpoint(format!(
                "{} logged episodes, but the environment is at episode {}",
                episodes.len(),
                self.episode_index
            )));
        }
        if muscles.len() != episodes.len() * self.n_muscles() {
            return Err(Error::Checkpoint("muscle log does not match the episode log".into()));
        }
        self.episode_log = episodes;
        self.muscle_log = muscles;
        Ok(())
    }
}

impl Environment for LatticeEnv {
    fn observation_dim(&self) -> usize {
        self.layout().len()
    }

    fn action_dim(&self) -> usize {
        self.n_muscles()
    }

    fn reset(&mut self) -> Result<Vec<f64>> {
        LatticeEnv::reset(self, self.seed, self.target_index).map(|o| o.to_vec())
    }

    fn step(&mut self, action: &[f64]) -> Result<Transition> {
        self.step_control(action).map(|(_, t)| t)
    }

    fn snapshot(&self) -> serde_json::Value {
        serde_json::json!({
            "seed": self.seed,
            "target_index": self.target_index,
            "episode_index": self.episode_index,
            "muscles": self.muscles,
        })
    }

    fn restore(&mut self, state: &serde_json::Value) -> Result<()> {
        #[derive(Deserialize)]
        struct Saved {
            seed: u64,
            target_index: usize,
            episode_index: usize,
            muscles: MuscleBank,
        }
        let saved: Saved = serde_json::from_value(state.clone())?;
        self.set_muscles(saved.muscles)?;
        self.progress.hook_pending = false;
        LatticeEnv::reset(self, saved.seed, saved.target_index)?;
        self.episode_index = saved.episode_index;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::muscle::adaptation_factor;

    fn desk() -> LatticeEnv {
        LatticeEnv::new(EnvConfig::desk_scale()).unwrap()
    }

    #[test]
    fn reward_tiers() {
        let cfg = RewardConfig::default();
        assert!((reward(0.0005, &cfg) - 1.99999975).abs() < 1e-12);
        assert!((reward(0.0015, &cfg) - 0.49999775).abs() < 1e-12);
        assert!((reward(0.05, &cfg) + 0.0025).abs() < 1e-12);
        // boundaries belong to the higher tier
        assert_eq!(bonus(0.001, &cfg), 2.0);
        assert_eq!(bonus(0.002, &cfg), 0.5);
        assert_eq!(bonus(0.0020001, &cfg), 0.0);
    }

    #[test]
    fn layout_ranges_tile_the_vector() {
        let l = ObservationLayout { n_points: 85, n_muscles: 42 };
        assert_eq!(l.len(), 597);
        assert_eq!(l.positions().end, l.velocities().start);
        assert_eq!(l.velocities().end, l.previous_actions().start);
        assert_eq!(l.previous_actions().end, l.force_ceilings().start);
        assert_eq!(l.force_ceilings().end, l.target().start);
        assert_eq!(l.target().end, l.len());
    }

    #[test]
    fn observation_layout_for_default_lattice() {
        let env = LatticeEnv::new(EnvConfig::default()).unwrap();
        let layout = env.layout();
        assert_eq!(layout, ObservationLayout { n_points: 85, n_muscles: 42 });
        assert_eq!(env.observation_dim(), 597);
    }

    #[test]
    fn reset_is_deterministic_and_sets_target() {
        let mut env = desk();
        let a = env.reset(7, 3).unwrap();
        let b = env.reset(7, 3).unwrap();
        assert_eq!(a, b);
        let corner = env.config().prism.corner(3).unwrap();
        assert_eq!(a.target, [corner.x, corner.y, corner.z]);
        assert!(a.previous_actions.iter().all(|x| *x == 0.0));
        assert_eq!(a.to_vec().len(), env.layout().len());
        assert!(env.reset(7, 9).is_err());
    }

    #[test]
    fn null_action_leaves_terminus_in_place() {
        let mut cfg = EnvConfig::desk_scale();
        cfg.episode.control_steps_per_episode = 2;
        let mut env = LatticeEnv::new(cfg).unwrap();
        env.reset(0, 1).unwrap();
        let n0 = distance_to_target(env.lattice(), &env.target());
        let (_, tr) = env.step_control(&[0.0; 6]).unwrap();
        assert!((tr.distance - n0).abs() < 1e-9);
        assert!((tr.reward - reward(n0, &env.config().reward)).abs() < 1e-12);
        assert!(!tr.done && !tr.unstable);
    }

    #[test]
    fn wrong_action_length_is_an_error() {
        let mut env = desk();
        env.reset(0, 1).unwrap();
        assert!(env.step_control(&[0.5; 5]).is_err());
    }

    #[test]
    fn hold_mode_keeps_first_activation() {
        let mut cfg = EnvConfig::desk_scale();
        cfg.episode.action_hold = true;
        cfg.episode.control_steps_per_episode = 2;
        let mut env = LatticeEnv::new(cfg).unwrap();
        env.reset(0, 1).unwrap();
        let first = [0.2, 0.4, 0.6, 0.8, 1.0, 0.0];
        env.step_control(&first).unwrap();
        let (obs, tr) = env.step_control(&[1.0; 6]).unwrap();
        assert_eq!(tr.action, first.to_vec());
        assert_eq!(obs.previous_actions, first.to_vec());
        assert!(tr.done);
        assert!(env.step_control(&first).is_err());
    }

    #[test]
    fn ceilings_in_observation_track_adaptation() {
        let mut env = desk();
        let mut obs = env.reset(0, 1).unwrap();
        let before = env.muscles().lambdas();
        let action = [1.0, 0.0, 0.5, 0.0, 0.25, 0.0];
        loop {
            assert_eq!(obs.force_ceilings, env.muscles().lambdas());
            let (o, tr) = env.step_control(&action).unwrap();
            obs = o;
            if tr.done {
                break;
            }
        }
        let obs = env.reset(0, 1).unwrap();
        assert_eq!(obs.force_ceilings, env.muscles().lambdas());
        let cfg = env.config().adapt;
        for row in env.muscle_log() {
            let expected = (adaptation_factor(row.peak_strain, row.force, &cfg) * before[row.muscle_id])
                .min(cfg.lambda_cap());
            assert_eq!(obs.force_ceilings[row.muscle_id], expected);
            if action[row.muscle_id] > 0.0 {
                assert!(expected > before[row.muscle_id]);
            }
        }
        assert_eq!(env.episode_log().len(), 1);
    }

    #[test]
    fn adaptation_off_keeps_ceilings() {
        let mut cfg = EnvConfig::desk_scale();
        cfg.adapt.adaptation_enabled = false;
        let mut env = LatticeEnv::new(cfg).unwrap();
        for _ in 0..2 {
            env.reset(0, 1).unwrap();
            while !env.step_control(&[1.0; 6]).unwrap().1.done {}
        }
        env.flush();
        assert!(env.muscles().lambdas().iter().all(|l| *l == 2.0));
        assert_eq!(env.episode_log().len(), 2);
    }

    #[test]
    fn instability_ends_episode_with_penalty() {
        let mut cfg = EnvConfig::desk_scale();
        cfg.sim.dt = 0.02;
        cfg.episode.control_dt = 1.0;
        let mut env = LatticeEnv::new(cfg).unwrap();
        let start = env.reset(0, 1).unwrap();
        let (obs, tr) = env.step_control(&[1.0; 6]).unwrap();
        assert!(tr.unstable && tr.done);
        assert_eq!(tr.reward, -2.0);
        assert!(obs.is_finite());
        assert_eq!(obs, start);
        env.reset(0, 1).unwrap();
        assert!(env.muscles().lambdas().iter().all(|l| *l == 2.0));
        assert!(env.episode_log()[0].unstable);
    }
}
