//! Trains the learner on a one-muscle spring task with a known optimum.

use latticeworm::env::{Environment, ToyReachEnv};
use latticeworm::ppo::{TrainConfig, Trainer};

fn main() -> latticeworm::Result<()> {
    let config = TrainConfig { total_episodes: 3000, learning_rate: 1e-3, seed: 1, ..TrainConfig::default() };
    let mut trainer = Trainer::new(ToyReachEnv::new(), config)?;
    let mut probe = ToyReachEnv::new();
    let obs = probe.reset()?;
    trainer.train_with(|t| {
        if t.episodes_done() % 500 == 0 {
            let a = t.act_deterministic(&obs)[0];
            println!("episode {:>5}: mean activation {a:.4}, log_std {:.3}", t.episodes_done(), t.params().log_std()[0]);
        }
        Ok(())
    })?;
    let action = trainer.act_deterministic(&obs);
    let tr = probe.step(&action)?;
    println!("optimum {:.4}, reached within {:.2e} m", probe.optimal_activation(), tr.distance);
    Ok(())
}
