use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use super::record::{write_csv_with_notes, RunMeta};
use crate::env::{distance_to_target, Environment, LatticeEnv};
use crate::error::{Error, Result};
use crate::ppo::Checkpoint;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeRow {
    pub step: usize,
    pub time: f64,
    pub rod: usize,
    pub node: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayResult {
    pub target_index: usize,
    pub initial_distance: f64,
    pub final_distance: f64,
    pub unstable: bool,
    pub csv: PathBuf,
    pub rows: Vec<NodeRow>,
}

fn dump(env: &LatticeEnv, step: usize, rows: &mut Vec<NodeRow>) {
    let sys = &env.lattice().system;
    for (r, rod) in sys.rods().iter().enumerate() {
        for (n, p) in rod.node_positions.iter().enumerate() {
            rows.push(NodeRow { step, time: sys.time(), rod: r, node: n, x: p.x, y: p.y, z: p.z });
        }
    }
}

/// One deterministic episode with the checkpointed policy's mean actions.
/// Node positions at every control step go to `replay_target<K>.csv` in
/// `run_dir`; x-y, x-z and y-z views are column projections of it.
pub fn replay(run_dir: &Path, config: &ExperimentConfig, target: Option<usize>) -> Result<ReplayResult> {
    let meta_path = run_dir.join("record.json");
    let meta: RunMeta = serde_json::from_slice(&std::fs::read(&meta_path).map_err(Error::at(&meta_path))?)?;
    if meta.config_hash != config.hash() {
        return Err(Error::config(format!(
            "run {} was trained with config {}, not {}; refusing to replay",
            meta.run_id,
            meta.config_hash,
            config.hash()
        )));
    }
    let ckpt = Checkpoint::load(&run_dir.join("checkpoint.json"))?;
    let mut env = LatticeEnv::new(config.env_for(meta.adaptation))?;
    if ckpt.params.obs_dim() != env.observation_dim() || ckpt.params.act_dim() != env.action_dim() {
        return Err(Error::config("checkpoint dimensions do not match the configured lattice"));
    }
    env.restore(&ckpt.env_state)?;
    let target_index = target.unwrap_or(meta.target_index);
    let mut obs = env.reset(meta.seed, target_index)?.to_vec();
    let initial_distance = distance_to_target(env.lattice(), &env.target());

    let mut rows = Vec::new();
    dump(&env, 0, &mut rows);
    let mut final_distance = initial_distance;
    let mut step = 0;
    let unstable = loop {
        let action = ckpt.params.forward(&ckpt.normalizer.normalize(&obs)).mean;
        let (o, tr) = env.step_control(&action)?;
        step += 1;
        obs = o.to_vec();
        if !tr.unstable {
            final_distance = tr.distance;
            dump(&env, step, &mut rows);
        }
        if tr.done {
            break tr.unstable;
        }
    };
    let csv = run_dir.join(format!("replay_target{target_index}.csv"));
    let notes = vec![
        format!("run {} target {target_index}", meta.run_id),
        format!("initial distance {initial_distance} m, final distance {final_distance} m"),
    ];
    write_csv_with_notes(&csv, "replay", &notes, &rows)?;
    Ok(ReplayResult { target_index, initial_distance, final_distance, unstable, csv, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expt::sweep::tests::tiny;
    use crate::expt::{run_one, RunSpec};

    #[test]
    fn replay_is_deterministic_and_checks_the_config() {
        let dir = tempfile::tempdir().unwrap();
        let c = tiny(dir.path());
        let run = dir.path().join("run");
        run_one(&c, &RunSpec::new(0, 5, true), &run, false).unwrap();

        let a = replay(&run, &c, None).unwrap();
        let b = replay(&run, &c, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.target_index, 5);
        assert!(!a.unstable);
        let n_nodes: usize = LatticeEnv::new(c.env.clone()).unwrap().lattice().system.rods().iter().map(|r| r.node_positions.len()).sum();
        let steps = c.env.episode.control_steps_per_episode + 1;
        assert_eq!(a.rows.len(), steps * n_nodes);
        assert!(a.csv.ends_with("replay_target5.csv"));

        let other = replay(&run, &c, Some(7)).unwrap();
        assert_eq!(other.target_index, 7);
        assert!(other.csv.ends_with("replay_target7.csv"));

        let mut changed = c.clone();
        changed.env.reward.inner_bonus = 3.0;
        assert!(matches!(replay(&run, &changed, None), Err(Error::Config(_))));
    }
}
