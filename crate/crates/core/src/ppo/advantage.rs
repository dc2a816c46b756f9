use crate::error::{Error, Result};

/// Discounted reward-to-go `R_t = sum_{s >= t} gamma^(s - t) r_s`.
pub fn rewards_to_go(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (o, &r) in out.iter_mut().zip(rewards).rev() {
        acc = r + gamma * acc;
        *o = acc;
    }
    out
}

/// Generalized advantage estimates over a finite episode; the value after
/// the last slot is taken as zero.
pub fn compute_gae(values: &[f64], rewards: &[f64], gamma: f64, lambda: f64) -> Result<Vec<f64>> {
    if values.len() != rewards.len() {
        return Err(Error::Contract(format!(
            "{} values but {} rewards",
            values.len(),
            rewards.len()
        )));
    }
    let mut adv = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        let next_value = values.get(t + 1).copied().unwrap_or(0.0);
        let delta = rewards[t] + gamma * next_value - values[t];
        acc = delta + gamma * lambda * acc;
        adv[t] = acc;
    }
    Ok(adv)
}
