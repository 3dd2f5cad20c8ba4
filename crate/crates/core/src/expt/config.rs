//! TOML experiment files.
//!
//! Keys carry their unit as a suffix (`_mm`, `_kpa`, `_mn`, ...); values are
//! converted to SI on load. Every key is optional and unknown keys are errors.
//! See `configs/default.toml` for the full schema with defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::env::{EnvConfig, EpisodeConfig, ObservationNodes, RewardConfig};
use crate::error::{Error, Result};
use crate::lattice::{LatticeSpec, TargetPrism};
use crate::muscle::AdaptConfig;
use crate::ppo::TrainConfig;
use crate::rod::{MaterialParams, SimConfig, Vec3};

const MM: f64 = 1e-3;
const KPA: f64 = 1e3;
const MN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub targets: Vec<usize>,
    /// Adaptation arms to run, e.g. `[true, false]`.
    pub arms: Vec<bool>,
    pub output_dir: PathBuf,
    /// Episodes between progress log lines.
    pub log_cadence: usize,
    /// Episodes between checkpoints; 0 writes only the final one.
    pub checkpoint_cadence: usize,
    pub rolling_window: usize,
    /// Trailing episodes averaged by the activation heatmap.
    pub heatmap_episodes: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ConfigFile::default().into_config().expect("defaults are valid")
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.env.validate().map_err(as_config)?;
        self.train.validate().map_err(as_config)?;
        if self.seeds.is_empty() {
            return Err(Error::config("experiment.seeds must not be empty"));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Error::config("experiment.seeds must be distinct"));
        }
        if self.targets.is_empty() || self.targets.iter().any(|t| !(1..=8).contains(t)) {
            return Err(Error::config("experiment.targets must be a non-empty subset of 1..=8"));
        }
        if self.arms.is_empty() {
            return Err(Error::config("experiment.adaptation must list at least one arm"));
        }
        if self.rolling_window == 0 || self.heatmap_episodes == 0 {
            return Err(Error::config("rolling_window and heatmap_episodes must be >= 1"));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        file.into_config()
    }

    /// Environment for one run.
    pub fn env_for(&self, adaptation: bool) -> EnvConfig {
        let mut env = self.env.clone();
        env.adapt.adaptation_enabled = adaptation;
        env
    }

    /// SHA-256 over the canonical JSON of the environment and training
    /// settings, which with (seed, target, arm) determine a run completely.
    /// Seed and target lists, output location, cadences and report settings
    /// are left out.
    pub fn hash(&self) -> String {
        let v = serde_json::json!({ "env": self.env, "train": self.train });
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Invalid(msg) => Error::Config(msg),
        other => other,
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub lattice: LatticeSection,
    pub simulation: SimulationSection,
    pub muscle: MuscleSection,
    pub reward: RewardSection,
    pub episode: EpisodeSection,
    pub target: TargetSection,
    pub train: TrainSection,
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeSection {
    pub height_mm: f64,
    pub diameter_mm: f64,
    pub columns: usize,
    pub levels: usize,
    pub structural_elements: usize,
    pub muscle_elements: usize,
    pub structure_radius_mm: f64,
    pub muscle_radius_mm: f64,
    pub structure_youngs_modulus_kpa: f64,
    pub muscle_youngs_modulus_kpa: f64,
    pub structure_poisson_ratio: f64,
    pub muscle_poisson_ratio: f64,
    pub structure_density_kg_per_m3: f64,
    pub muscle_density_kg_per_m3: f64,
    pub connection_stiffness_mn_per_mm: f64,
    pub connection_damping_mns_per_mm: f64,
}

impl Default for LatticeSection {
    fn default() -> Self {
        Self {
            height_mm: 100.0,
            diameter_mm: 75.0,
            columns: 6,
            levels: 7,
            structural_elements: 40,
            muscle_elements: 2,
            structure_radius_mm: 10.0,
            muscle_radius_mm: 5.0,
            structure_youngs_modulus_kpa: 70.0,
            muscle_youngs_modulus_kpa: 25.0,
            structure_poisson_ratio: 0.5,
            muscle_poisson_ratio: 0.5,
            structure_density_kg_per_m3: 1070.0,
            muscle_density_kg_per_m3: 1060.0,
            connection_stiffness_mn_per_mm: 100.0,
            connection_damping_mns_per_mm: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub dt_s: f64,
    pub damping_mns_per_m: f64,
    pub gravity: bool,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self { dt_s: 1e-5, damping_mns_per_m: 35.0, gravity: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MuscleSection {
    pub initial_force_mn: f64,
    pub strain_coefficient: f64,
    pub force_coefficient_per_mn: f64,
}

impl Default for MuscleSection {
    fn default() -> Self {
        Self { initial_force_mn: 2000.0, strain_coefficient: 1e-6, force_coefficient_per_mn: 4e-8 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardSection {
    pub bonus_radius_mm: f64,
    pub inner_bonus: f64,
    pub outer_bonus: f64,
    pub instability_penalty: f64,
}

impl Default for RewardSection {
    fn default() -> Self {
        Self { bonus_radius_mm: 1.0, inner_bonus: 2.0, outer_bonus: 0.5, instability_penalty: -2.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeSection {
    pub control_steps: usize,
    pub control_dt_s: f64,
    pub action_hold: bool,
    pub observation_nodes: ObservationNodes,
}

impl Default for EpisodeSection {
    fn default() -> Self {
        Self { control_steps: 10, control_dt_s: 0.1, action_hold: true, observation_nodes: ObservationNodes::MuscleEnds }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetSection {
    /// Defaults to the lattice axis at full height.
    pub center_mm: Option<[f64; 3]>,
    pub half_extents_mm: [f64; 3],
}

impl Default for TargetSection {
    fn default() -> Self {
        Self { center_mm: None, half_extents_mm: [30.0, 30.0, 20.0] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
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
    pub hidden_sizes: Vec<usize>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            n_steps: t.n_steps,
            learning_rate: t.learning_rate,
            discount_gamma: t.discount_gamma,
            gae_lambda: t.gae_lambda,
            clip_range: t.clip_range,
            n_epochs: t.n_epochs,
            minibatch_size: t.minibatch_size,
            value_coef: t.value_coef,
            entropy_coef: t.entropy_coef,
            max_grad_norm: t.max_grad_norm,
            total_episodes: 8500,
            hidden_sizes: t.hidden,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    On,
    Off,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub seeds: Vec<u64>,
    pub targets: Vec<usize>,
    pub adaptation: Vec<Arm>,
    pub output_dir: PathBuf,
    pub log_cadence: usize,
    pub checkpoint_cadence: usize,
    pub rolling_window: usize,
    pub heatmap_episodes: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            seeds: vec![0, 1, 2, 3, 4],
            targets: (1..=8).collect(),
            adaptation: vec![Arm::On, Arm::Off],
            output_dir: PathBuf::from("runs"),
            log_cadence: 50,
            checkpoint_cadence: 500,
            rolling_window: 50,
            heatmap_episodes: 100,
        }
    }
}

impl ConfigFile {
    pub fn into_config(self) -> Result<ExperimentConfig> {
        let l = &self.lattice;
        let lattice = LatticeSpec {
            height: l.height_mm * MM,
            diameter: l.diameter_mm * MM,
            n_columns: l.columns,
            n_levels: l.levels,
            structural_elements: l.structural_elements,
            muscle_elements: l.muscle_elements,
            structural_radius: l.structure_radius_mm * MM,
            muscle_radius: l.muscle_radius_mm * MM,
            structural_material: MaterialParams {
                youngs_modulus: l.structure_youngs_modulus_kpa * KPA,
                poisson_ratio: l.structure_poisson_ratio,
                density: l.structure_density_kg_per_m3,
            },
            muscle_material: MaterialParams {
                youngs_modulus: l.muscle_youngs_modulus_kpa * KPA,
                poisson_ratio: l.muscle_poisson_ratio,
                density: l.muscle_density_kg_per_m3,
            },
            // mN/mm is N/m; mN s/mm is N s/m
            connection_stiffness: l.connection_stiffness_mn_per_mm,
            connection_damping: l.connection_damping_mns_per_mm,
        };
        let prism = match self.target.center_mm {
            Some(c) => TargetPrism {
                center: Vec3::new(c[0], c[1], c[2]) * MM,
                half_extents: Vec3::from(self.target.half_extents_mm) * MM,
            },
            None => TargetPrism {
                half_extents: Vec3::from(self.target.half_extents_mm) * MM,
                ..TargetPrism::default_for(&lattice)
            },
        };
        let s = &self.simulation;
        let sim = SimConfig {
            dt: s.dt_s,
            damping_coefficient: s.damping_mns_per_m * MN,
            gravity: s.gravity,
            ..SimConfig::default()
        };
        let m = &self.muscle;
        let adapt = AdaptConfig {
            beta: m.strain_coefficient,
            gamma: m.force_coefficient_per_mn,
            lambda_0: m.initial_force_mn * MN,
            adaptation_enabled: true,
        };
        let r = &self.reward;
        let reward = RewardConfig {
            bonus_radius_d: r.bonus_radius_mm * MM,
            inner_bonus: r.inner_bonus,
            outer_bonus: r.outer_bonus,
            instability_penalty: r.instability_penalty,
        };
        let e = &self.episode;
        let episode = EpisodeConfig {
            control_steps_per_episode: e.control_steps,
            control_dt: e.control_dt_s,
            action_hold: e.action_hold,
        };
        let t = self.train;
        let train = TrainConfig {
            n_steps: t.n_steps,
            learning_rate: t.learning_rate,
            discount_gamma: t.discount_gamma,
            gae_lambda: t.gae_lambda,
            clip_range: t.clip_range,
            n_epochs: t.n_epochs,
            minibatch_size: t.minibatch_size,
            value_coef: t.value_coef,
            entropy_coef: t.entropy_coef,
            max_grad_norm: t.max_grad_norm,
            total_episodes: t.total_episodes,
            seed: 0,
            hidden: t.hidden_sizes,
        };
        let x = self.experiment;
        let config = ExperimentConfig {
            env: EnvConfig { lattice, sim, adapt, reward, episode, prism, observation_nodes: e.observation_nodes },
            train,
            seeds: x.seeds,
            targets: x.targets,
            arms: x.adaptation.iter().map(|a| *a == Arm::On).collect(),
            output_dir: x.output_dir,
            log_cadence: x.log_cadence,
            checkpoint_cadence: x.checkpoint_cadence,
            rolling_window: x.rolling_window,
            heatmap_episodes: x.heatmap_episodes,
        };
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_convert_to_si() {
        let c = ExperimentConfig::default();
        let l = &c.env.lattice;
        assert_eq!(l.height, 0.1);
        assert_eq!(l.diameter, 0.075);
        assert_eq!(l.structural_material.youngs_modulus, 70e3);
        assert_eq!(l.connection_stiffness, 100.0);
        assert_eq!(c.env.sim.damping_coefficient, 0.035);
        assert_eq!(c.env.adapt.lambda_0, 2.0);
        assert_eq!(c.env.reward.bonus_radius_d, 0.001);
        assert_eq!(c.env.prism.center, Vec3::new(0.0, 0.0, 0.1));
        assert_eq!(c.train.n_steps, 2);
        assert_eq!(c.arms, vec![true, false]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml("[lattice]\nheight = 100\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
        assert!(ExperimentConfig::from_toml("[latice]\n").is_err());
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for text in [
            "[experiment]\nseeds = []\n",
            "[experiment]\nseeds = [1, 1]\n",
            "[experiment]\ntargets = [9]\n",
            "[train]\ndiscount_gamma = 0.0\n",
            "[lattice]\nstructure_radius_mm = -1.0\n",
        ] {
            let err = ExperimentConfig::from_toml(text).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{text}: {err}");
        }
    }

    #[test]
    fn hash_covers_what_determines_a_run() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig {
            output_dir: "elsewhere".into(),
            seeds: vec![9],
            targets: vec![3],
            arms: vec![false],
            log_cadence: 1,
            rolling_window: 7,
            ..a.clone()
        };
        assert_eq!(a.hash(), b.hash());
        let mut d = a.clone();
        d.env.reward.outer_bonus = 0.25;
        assert_ne!(a.hash(), d.hash());
        let mut c = a.clone();
        c.train.learning_rate = 1e-3;
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let c = ExperimentConfig::from_toml("[lattice]\ncolumns = 3\nlevels = 2\n[experiment]\ntargets = [2]\n").unwrap();
        assert_eq!(c.env.lattice.n_columns, 3);
        assert_eq!(c.env.lattice.structural_elements, 40);
        assert_eq!(c.targets, vec![2]);
    }

    #[test]
    fn committed_configs_match_the_code() {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let default = ExperimentConfig::load(&root.join("default.toml")).unwrap();
        assert_eq!(default, ExperimentConfig::default());
        let desk = ExperimentConfig::load(&root.join("desk.toml")).unwrap();
        assert_eq!(desk.env, EnvConfig::desk_scale());
        assert_eq!(desk.train.total_episodes, 1000);
    }
}
