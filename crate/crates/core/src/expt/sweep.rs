use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::record::{read_csv, write_csv, RunMeta, RunRecord, RECORD_FORMAT};
use crate::env::{EpisodeRow, LatticeEnv, MuscleEpisodeRow};
use crate::error::{Error, Result};
use crate::ppo::{Checkpoint, TrainConfig, Trainer};

pub const MANIFEST_FORMAT: &str = "latticeworm-manifest v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Pending,
    Running,
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub run_id: String,
    pub seed: u64,
    pub target_index: usize,
    pub adaptation: bool,
}

impl RunSpec {
    pub fn new(seed: u64, target_index: usize, adaptation: bool) -> Self {
        let arm = if adaptation { "on" } else { "off" };
        Self { run_id: format!("t{target_index}_s{seed}_{arm}"), seed, target_index, adaptation }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    #[serde(flatten)]
    pub spec: RunSpec,
    pub status: RunStatus,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub runs: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn path(out: &Path) -> PathBuf {
        out.join("manifest.json")
    }

    pub fn load(out: &Path) -> Result<Self> {
        let path = Self::path(out);
        let m: Self = serde_json::from_slice(&std::fs::read(&path).map_err(Error::at(&path))?)?;
        if m.format != MANIFEST_FORMAT {
            return Err(Error::invalid(format!("{}: unknown manifest format {:?}", path.display(), m.format)));
        }
        Ok(m)
    }

    /// Rewrites the manifest through a temporary file and rename.
    pub fn save(&self, out: &Path) -> Result<()> {
        let path = Self::path(out);
        let tmp = out.join("manifest.json.tmp");
        std::fs::write(&tmp, serde_json::to_vec_pretty(self)?).map_err(Error::at(&tmp))?;
        std::fs::rename(&tmp, &path).map_err(Error::at(&path))?;
        Ok(())
    }
}

/// Every (seed, target, arm) combination, in that nesting order.
pub fn plan_runs(config: &ExperimentConfig) -> Vec<RunSpec> {
    let mut runs = Vec::new();
    for &target in &config.targets {
        for &adaptation in &config.arms {
            for &seed in &config.seeds {
                runs.push(RunSpec::new(seed, target, adaptation));
            }
        }
    }
    runs
}

pub fn run_dir(out: &Path, run_id: &str) -> PathBuf {
    out.join("runs").join(run_id)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RunStart {
    spec: RunSpec,
    config_hash: String,
}

/// Trains one agent and writes its record, metrics and checkpoint to `dir`.
/// With `resume`, a completed run is returned as is and an interrupted one
/// continues from its last checkpoint. Without it, `dir` must not hold a run.
pub fn run_one(config: &ExperimentConfig, spec: &RunSpec, dir: &Path, resume: bool) -> Result<RunRecord> {
    std::fs::create_dir_all(dir).map_err(Error::at(dir))?;
    let started = Instant::now();
    let hash = config.hash();
    let start = RunStart { spec: spec.clone(), config_hash: hash.clone() };
    let start_path = dir.join("run.json");
    let ckpt_path = dir.join("checkpoint.json");
    let record_path = dir.join("record.json");
    let train = TrainConfig { seed: spec.seed, ..config.train.clone() };
    let mut env = LatticeEnv::new(config.env_for(spec.adaptation))?;
    env.configure(spec.seed, spec.target_index)?;

    if start_path.exists() {
        if !resume {
            return Err(Error::config(format!(
                "{} already holds a run; pass --resume or choose another output directory",
                dir.display()
            )));
        }
        let previous: RunStart =
            serde_json::from_slice(&std::fs::read(&start_path).map_err(Error::at(&start_path))?)?;
        if previous != start {
            return Err(Error::config(format!(
                "{} holds run {} under config {}; refusing to resume",
                dir.display(),
                previous.spec.run_id,
                previous.config_hash
            )));
        }
        if record_path.exists() {
            log::info!("{}: already complete", spec.run_id);
            return RunRecord::load(dir);
        }
    }

    let mut trainer = if start_path.exists() && ckpt_path.exists() {
        let mut ckpt = Checkpoint::load(&ckpt_path)?;
        let done = ckpt.episodes_done;
        ckpt.config.total_episodes = train.total_episodes;
        if ckpt.config != train {
            return Err(Error::config(format!("{}: checkpoint training settings differ", dir.display())));
        }
        let mut trainer = Trainer::from_checkpoint(env, ckpt)?;
        let mut episodes: Vec<EpisodeRow> = read_csv(&dir.join("episodes.csv"))?;
        let mut muscles: Vec<MuscleEpisodeRow> = read_csv(&dir.join("adaptation.csv"))?;
        episodes.retain(|r| r.episode < done);
        muscles.retain(|r| r.episode < done);
        trainer.env_mut().restore_logs(episodes, muscles)?;
        log::info!("{}: resuming at episode {done}", spec.run_id);
        trainer
    } else {
        std::fs::write(&start_path, serde_json::to_vec_pretty(&start)?).map_err(Error::at(&start_path))?;
        let trainer = Trainer::new(env, train)?;
        save_progress(&trainer, dir)?;
        trainer
    };

    trainer.train_with(|t| {
        let done = t.episodes_done();
        if config.log_cadence > 0 && done % config.log_cadence == 0 {
            let last = t.history().last().map_or(f64::NAN, |h| h.episode_return);
            log::info!("{}: episode {done}/{} return {last:.6}", spec.run_id, config.train.total_episodes);
        }
        if config.checkpoint_cadence > 0 && done % config.checkpoint_cadence == 0 {
            save_progress(t, dir)?;
        }
        Ok(())
    })?;
    save_progress(&trainer, dir)?;
    write_csv(&dir.join("metrics.csv"), "metrics", trainer.metrics())?;

    let mut env = trainer.into_env();
    env.flush();
    let record = RunRecord {
        meta: RunMeta {
            format: RECORD_FORMAT.into(),
            run_id: spec.run_id.clone(),
            seed: spec.seed,
            target_index: spec.target_index,
            adaptation: spec.adaptation,
            config_hash: hash,
            n_columns: config.env.lattice.n_columns,
            n_levels: config.env.lattice.n_levels,
            lambda_0: config.env.adapt.lambda_0,
            episodes: env.episode_log().len(),
            wall_clock_seconds: started.elapsed().as_secs_f64(),
            finished_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        },
        episodes: env.episode_log().to_vec(),
        muscles: env.muscle_log().to_vec(),
    };
    record.save(dir)?;
    Ok(record)
}

/// Checkpoint plus the episode logs so far.
fn save_progress(trainer: &Trainer<LatticeEnv>, dir: &Path) -> Result<()> {
    write_csv(&dir.join("episodes.csv"), "episodes", trainer.env().episode_log())?;
    write_csv(&dir.join("adaptation.csv"), "adaptation", trainer.env().muscle_log())?;
    trainer.checkpoint()?.save(&dir.join("checkpoint.json"))
}

fn probe_writable(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(Error::at(out))?;
    let probe = out.join(".write-probe");
    std::fs::write(&probe, b"").map_err(Error::at(&probe))?;
    std::fs::remove_file(&probe).map_err(Error::at(&probe))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub completed: Vec<String>,
    pub skipped: Vec<String>,
    pub failed: Vec<(String, String)>,
}

/// Runs every planned combination on up to `workers` threads. Failed runs are
/// marked in the manifest and do not stop the sweep. With `resume`, runs
/// already completed under an identical config are skipped and interrupted
/// ones continue from their last checkpoint.
pub fn run_sweep(config: &ExperimentConfig, workers: usize, resume: bool) -> Result<SweepSummary> {
    config.validate()?;
    let out = config.output_dir.clone();
    probe_writable(&out)?;
    let hash = config.hash();
    let planned = plan_runs(config);

    let mut manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        config_hash: hash.clone(),
        config: config.clone(),
        runs: planned
            .iter()
            .map(|spec| ManifestEntry { spec: spec.clone(), status: RunStatus::Pending, error: None })
            .collect(),
    };
    let mut skipped = Vec::new();
    if Manifest::path(&out).exists() {
        if !resume {
            return Err(Error::config(format!(
                "{} already holds a sweep; pass --resume to continue it or choose another output directory",
                out.display()
            )));
        }
        let previous = Manifest::load(&out)?;
        if previous.config_hash != hash {
            return Err(Error::config(format!(
                "config hash {hash} differs from the manifest's {}; refusing to resume",
                previous.config_hash
            )));
        }
        for entry in &mut manifest.runs {
            let done = previous
                .runs
                .iter()
                .any(|p| p.spec == entry.spec && p.status == RunStatus::Completed);
            if done && run_dir(&out, &entry.spec.run_id).join("record.json").exists() {
                entry.status = RunStatus::Completed;
                skipped.push(entry.spec.run_id.clone());
            }
        }
    }
    manifest.save(&out)?;

    let todo: Vec<usize> =
        (0..manifest.runs.len()).filter(|&i| manifest.runs[i].status != RunStatus::Completed).collect();
    let manifest = Mutex::new(manifest);
    let next = AtomicUsize::new(0);
    let failed = Mutex::new(Vec::new());
    let completed = Mutex::new(Vec::new());
    let update = |i: usize, status: RunStatus, error: Option<String>| -> Result<()> {
        let mut m = manifest.lock().unwrap_or_else(|e| e.into_inner());
        m.runs[i].status = status;
        m.runs[i].error = error;
        m.save(&out)
    };

    let worker = || -> Result<()> {
        loop {
            let k = next.fetch_add(1, Ordering::SeqCst);
            let Some(&i) = todo.get(k) else { return Ok(()) };
            let spec = manifest.lock().unwrap_or_else(|e| e.into_inner()).runs[i].spec.clone();
            update(i, RunStatus::Running, None)?;
            let dir = run_dir(&out, &spec.run_id);
            let outcome = catch_unwind(AssertUnwindSafe(|| run_one(config, &spec, &dir, resume)));
            let error = match outcome {
                Ok(Ok(_)) => None,
                Ok(Err(e)) => Some(e.to_string()),
                Err(panic) => Some(
                    panic
                        .downcast_ref::<&str>()
                        .map(|s| s.to_string())
                        .or_else(|| panic.downcast_ref::<String>().cloned())
                        .unwrap_or_else(|| "worker panicked".into()),
                ),
            };
            match error {
                None => {
                    update(i, RunStatus::Completed, None)?;
                    completed.lock().unwrap_or_else(|e| e.into_inner()).push(spec.run_id);
                }
                Some(msg) => {
                    log::error!("run {} failed: {msg}", spec.run_id);
                    update(i, RunStatus::Failed, Some(msg.clone()))?;
                    failed.lock().unwrap_or_else(|e| e.into_inner()).push((spec.run_id, msg));
                }
            }
        }
    };

    let n_workers = workers.max(1).min(todo.len().max(1));
    std::thread::scope(|s| -> Result<()> {
        let handles: Vec<_> = (0..n_workers).map(|_| s.spawn(worker)).collect();
        for h in handles {
            h.join().map_err(|_| Error::invalid("sweep worker panicked outside a run"))??;
        }
        Ok(())
    })?;

    Ok(SweepSummary {
        completed: completed.into_inner().unwrap_or_else(|e| e.into_inner()),
        skipped,
        failed: failed.into_inner().unwrap_or_else(|e| e.into_inner()),
    })
}
