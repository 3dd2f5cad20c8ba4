//! Reward as a function of distance to the target.

use latticeworm::env::{reward, RewardConfig};

fn main() {
    let config = RewardConfig::default();
    println!("distance_m,reward");
    for k in 0..=60 {
        let n = k as f64 * 5e-5;
        println!("{n:.5},{:.8}", reward(n, &config));
    }
}
