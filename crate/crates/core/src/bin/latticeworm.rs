use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use latticeworm::env::{Environment, LatticeEnv};
use latticeworm::expt::{self, run_dir, ExperimentConfig, RunSpec};
use latticeworm::Error;

/// Adaptive muscle lattice reaching experiments.
#[derive(Debug, Parser)]
#[command(name = "latticeworm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the lattice, observation layout and config hash.
    Describe(Common),
    /// Train one agent.
    Train(Common),
    /// Train every seed, target and arm of the config.
    Sweep(Common),
    /// Write figure CSVs and SVGs for a finished sweep.
    Report(Common),
    /// Roll out one trained agent with mean actions and dump node positions.
    Replay(Common),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML experiment file; built-in defaults when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides experiment.output_dir).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Target prism corner, 1 to 8.
    #[arg(long, value_name = "K")]
    target: Option<usize>,
    #[arg(long, value_enum)]
    adaptation: Option<OnOff>,
    /// Training episodes per run (overrides train.total_episodes).
    #[arg(long, value_name = "N")]
    episodes: Option<usize>,
    #[arg(long, value_name = "N", default_value_t = 1)]
    workers: usize,
    /// Continue an interrupted run or sweep in the output directory.
    #[arg(long)]
    resume: bool,
}

impl Common {
    fn load(&self) -> latticeworm::Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        if let Some(n) = self.episodes {
            config.train.total_episodes = n;
        }
        if let Some(t) = self.target {
            config.targets = vec![t];
        }
        if let Some(s) = self.seed {
            config.seeds = vec![s];
        }
        if let Some(a) = self.adaptation {
            config.arms = vec![a == OnOff::On];
        }
        config.validate()?;
        Ok(config)
    }

    /// The single run selected by the flags, or the first of each list.
    fn spec(&self, config: &ExperimentConfig) -> RunSpec {
        RunSpec::new(config.seeds[0], config.targets[0], config.arms[0])
    }
}

fn describe(config: &ExperimentConfig) -> latticeworm::Result<()> {
    let env = LatticeEnv::new(config.env.clone())?;
    let l = &config.env.lattice;
    let sys = &env.lattice().system;
    let nodes: usize = sys.rods().iter().map(|r| r.node_positions.len()).sum();
    let layout = env.layout();
    println!("config hash        {}", config.hash());
    println!("lattice            {} columns x {} levels, height {} m, diameter {} m", l.n_columns, l.n_levels, l.height, l.diameter);
    println!("rods               {} ({} muscles), {} nodes", sys.rods().len(), env.n_muscles(), nodes);
    println!("timestep           {} s ({} substeps per control step)", config.env.sim.dt, config.env.substeps());
    println!(
        "episode            {} control steps of {} s, hold {}",
        config.env.episode.control_steps_per_episode, config.env.episode.control_dt, config.env.episode.action_hold
    );
    println!("observation        {} values ({} points)", env.observation_dim(), layout.n_points);
    println!("action             {} activations in [0, 1]", env.action_dim());
    for k in 1..=8 {
        let c = config.env.prism.corner(k)?;
        println!("target corner {k}    ({:.4}, {:.4}, {:.4}) m", c.x, c.y, c.z);
    }
    let runs = expt::plan_runs(config).len();
    println!("sweep              {runs} runs of {} episodes", config.train.total_episodes);
    Ok(())
}

fn run(cli: Cli) -> latticeworm::Result<()> {
    match cli.command {
        Command::Describe(c) => describe(&c.load()?),
        Command::Train(c) => {
            let config = c.load()?;
            let spec = c.spec(&config);
            let dir = run_dir(&config.output_dir, &spec.run_id);
            let record = expt::run_one(&config, &spec, &dir, c.resume)?;
            let best = expt::max_return(&record).unwrap_or(f64::NAN);
            let unstable = record.episodes.iter().filter(|e| e.unstable).count();
            println!(
                "{}: {} episodes, best return {best:.6}, {unstable} unstable, written to {}",
                spec.run_id,
                record.episodes.len(),
                dir.display()
            );
            Ok(())
        }
        Command::Sweep(c) => {
            let config = c.load()?;
            let summary = expt::run_sweep(&config, c.workers, c.resume)?;
            println!(
                "sweep: {} completed, {} skipped, {} failed",
                summary.completed.len(),
                summary.skipped.len(),
                summary.failed.len()
            );
            for (id, msg) in &summary.failed {
                eprintln!("  {id}: {msg}");
            }
            if summary.failed.is_empty() {
                Ok(())
            } else {
                Err(Error::Training(format!("{} runs failed", summary.failed.len())))
            }
        }
        Command::Report(c) => {
            let config = c.load()?;
            let emitted = expt::report(&config.output_dir, config.rolling_window, config.heatmap_episodes)?;
            for e in &emitted {
                println!("{}", e.svg.display());
                for n in &e.notes {
                    println!("  note: {n}");
                }
            }
            Ok(())
        }
        Command::Replay(c) => {
            let config = c.load()?;
            let spec = c.spec(&config);
            let r = expt::replay(&run_dir(&config.output_dir, &spec.run_id), &config, Some(spec.target_index))?;
            println!(
                "{} target {}: distance {:.6} m -> {:.6} m{}, nodes in {}",
                spec.run_id,
                r.target_index,
                r.initial_distance,
                r.final_distance,
                if r.unstable { " (unstable)" } else { "" },
                r.csv.display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Invalid(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
