//! A small desk-scale sweep over two seeds and both arms, then the figures.
//!
//! cargo run --release --example sweep_and_report -- [out_dir]

use std::path::PathBuf;

use latticeworm::env::EnvConfig;
use latticeworm::expt::{self, ExperimentConfig};

fn main() -> latticeworm::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs/example"));
    let mut config = ExperimentConfig { env: EnvConfig::desk_scale(), ..ExperimentConfig::default() };
    config.train.total_episodes = 40;
    config.seeds = vec![0, 1];
    config.targets = vec![5];
    config.arms = vec![true, false];
    config.output_dir = out.clone();
    config.rolling_window = 10;
    config.heatmap_episodes = 10;
    config.validate()?;

    let summary = expt::run_sweep(&config, 2, true)?;
    println!("{} completed, {} skipped, {} failed", summary.completed.len(), summary.skipped.len(), summary.failed.len());
    for e in expt::report(&out, config.rolling_window, config.heatmap_episodes)? {
        println!("{} ({})", e.svg.display(), e.csv.display());
    }
    Ok(())
}
