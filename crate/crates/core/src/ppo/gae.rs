//! Generalized advantage estimation over time-major `(step, env)` data.

/// Advantages for one stream. `next_values[t]` is the value the step
/// bootstraps from: `V(s_{t+1})` inside an episode, `V(s_T)` at a
/// truncation and 0 at a termination. `dones[t]` stops the recursion.
pub fn compute_gae(rewards: &[f64], values: &[f64], dones: &[bool], next_values: &[f64], gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert!(values.len() == n && dones.len() == n && next_values.len() == n, "gae inputs differ in length");
    let mut adv = vec![0.0; n];
    let mut carry = 0.0;
    for t in (0..n).rev() {
        let delta = rewards[t] + gamma * next_values[t] - values[t];
        carry = delta + if dones[t] { 0.0 } else { gamma * lambda * carry };
        adv[t] = carry;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Shifts and scales to zero mean and unit (population) standard deviation.
pub fn normalize(xs: &mut [f64]) {
    let n = xs.len();
    if n == 0 {
        return;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    for x in xs.iter_mut() {
        *x = if std > 1e-12 { (*x - mean) / std } else { *x - mean };
    }
}
