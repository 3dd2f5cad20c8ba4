/// Generalized advantage estimation by reverse scan.
///
/// `dones[t]` marks that the episode ended at step `t`, so `values[t + 1]`
/// (or `bootstrap_value` after the last step) is not carried across it.
/// Returns `(advantages, returns)` with `returns = advantages + values`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap_value: f64,
    discount_gamma: f64,
    gae_lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 < n { values[t + 1] } else { bootstrap_value };
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + discount_gamma * next_value * live - values[t];
        next_adv = delta + discount_gamma * gae_lambda * live * next_adv;
        adv[t] = next_adv;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Zero mean, unit sample deviation; left alone for fewer than two entries.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.len() < 2 {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    adv.iter_mut().for_each(|a| *a = (*a - mean) / (std + 1e-8));
}
