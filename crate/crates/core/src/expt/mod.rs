//! Experiment orchestration: config files, sweeps, run records, figures and
//! replays.

mod config;
mod record;
mod replay;
mod report;
mod sweep;

pub use config::{
    Arm, ConfigFile, EpisodeSection, ExperimentConfig, ExperimentSection, LatticeSection, MuscleSection,
    RewardSection, SimulationSection, TargetSection, TrainSection,
};
pub use record::{read_csv, write_csv, write_csv_with_notes, RunMeta, RunRecord, RECORD_FORMAT};
pub use replay::{replay, NodeRow, ReplayResult};
pub use report::{
    activation_heatmap, adaptation_traces, emit_activation_heatmap, emit_adaptation_traces, emit_max_reward_bars,
    emit_reward_curves, max_return, max_reward_bars, mean_and_std, report, reward_curves, rolling_stable_mean,
    BarRow, CurveRow, Emitted, HeatRow, TraceRow,
};
pub use sweep::{
    plan_runs, run_dir, run_one, run_sweep, Manifest, ManifestEntry, RunSpec, RunStatus, SweepSummary,
    MANIFEST_FORMAT,
};
