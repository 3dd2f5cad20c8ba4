//! Trains a short desk run, then replays it with mean actions and reports
//! the distance to the target.
//!
//! cargo run --release --example replay -- [out_dir]

use std::path::PathBuf;

use latticeworm::env::EnvConfig;
use latticeworm::expt::{self, run_dir, ExperimentConfig, RunSpec};

fn main() -> latticeworm::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs/replay"));
    let mut config = ExperimentConfig { env: EnvConfig::desk_scale(), ..ExperimentConfig::default() };
    config.train.total_episodes = 60;
    config.output_dir = out.clone();
    config.validate()?;

    let spec = RunSpec::new(0, 5, true);
    let dir = run_dir(&out, &spec.run_id);
    expt::run_one(&config, &spec, &dir, true)?;
    let r = expt::replay(&dir, &config, None)?;
    println!(
        "target {}: {:.5} m -> {:.5} m, node trajectories in {}",
        r.target_index,
        r.initial_distance,
        r.final_distance,
        r.csv.display()
    );
    Ok(())
}
