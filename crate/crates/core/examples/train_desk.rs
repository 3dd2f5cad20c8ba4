//! Trains one adaptive agent on the desk-scale lattice and prints how the
//! return and the muscle ceilings move.
//!
//! cargo run --release --example train_desk -- [episodes] [target]

use latticeworm::env::{EnvConfig, LatticeEnv};
use latticeworm::ppo::{TrainConfig, Trainer};

fn main() -> latticeworm::Result<()> {
    let mut args = std::env::args().skip(1);
    let episodes = args.next().and_then(|s| s.parse().ok()).unwrap_or(200);
    let target = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);

    let mut env = LatticeEnv::new(EnvConfig::desk_scale())?;
    env.configure(0, target)?;
    let config = TrainConfig { total_episodes: episodes, ..TrainConfig::default() };
    let mut trainer = Trainer::new(env, config)?;
    let every = (episodes / 10).max(1);
    trainer.train_with(|t| {
        let last = t.history().last().unwrap();
        if t.episodes_done() % every == 0 {
            let lambdas = t.env().muscles().lambdas();
            let max = lambdas.iter().cloned().fold(f64::MIN, f64::max);
            println!(
                "episode {:>5}: return {:.5}, distance {:.4} m, max lambda {max:.4} N",
                last.episode, last.episode_return, last.final_distance
            );
        }
        Ok(())
    })?;
    Ok(())
}
