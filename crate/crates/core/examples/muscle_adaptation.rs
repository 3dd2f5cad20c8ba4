//! Ceiling growth of one muscle held at full activation, episode after
//! episode, until it reaches twice its starting value.

use latticeworm::muscle::{AdaptConfig, MuscleBank};

fn main() {
    let config = AdaptConfig::default();
    let mut bank = MuscleBank::new(1, config);
    let mut episode = 0;
    while bank.lambdas()[0] < config.lambda_cap() {
        let force = bank.lambdas()[0];
        bank.end_episode(&[vec![0.05]], &[force]);
        episode += 1;
        if episode % 1000 == 0 {
            println!("episode {episode:>6}: lambda {:.4} N", bank.lambdas()[0]);
        }
    }
    println!("capped at {} N after {episode} episodes", bank.lambdas()[0]);
}
