//! Credit assignment kernels: generalized advantage estimation and the
//! clipped policy-ratio surrogate.

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CreditError {
    #[error("expected {expected} values for {rewards} rewards, got {got}")]
    LengthMismatch { rewards: usize, expected: usize, got: usize },
    #[error("{name} = {value} outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
}

/// Advantages by the backward recursion
/// `A_t = δ_t + γλ A_{t+1}`, `δ_t = r_t + γ V_{t+1} − V_t`, `A_T = 0`.
/// `values` holds one entry per reward plus the terminal value.
pub fn gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Result<Vec<f64>, CreditError> {
    if values.len() != rewards.len() + 1 {
        return Err(CreditError::LengthMismatch {
            rewards: rewards.len(),
            expected: rewards.len() + 1,
            got: values.len(),
        });
    }
    for (name, value) in [("gamma", gamma), ("lambda", lambda)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(CreditError::OutOfRange { name, value });
        }
    }
    let mut adv = vec![0.0; rewards.len()];
    let mut next = 0.0;
    for t in (0..rewards.len()).rev() {
        let delta = rewards[t] + gamma * values[t + 1] - values[t];
        next = delta + gamma * lambda * next;
        adv[t] = next;
    }
    Ok(adv)
}

/// `min(ρ·A, clip(ρ, 1−ε, 1+ε)·A)`.
pub fn ppo_clip_term(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    (ratio * advantage).min(clipped * advantage)
}
