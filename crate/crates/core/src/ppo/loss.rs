use crate::error::{Error, Result};

/// `(1 + eps) A` for non-negative advantages, `(1 - eps) A` otherwise.
pub fn clip_fn(eps: f64, advantage: f64) -> f64 {
    if advantage >= 0.0 {
        (1.0 + eps) * advantage
    } else {
        (1.0 - eps) * advantage
    }
}

/// Clipped surrogate `min(ratio * A, clip_fn(eps, A))`.
pub fn clip_objective(ratio: f64, advantage: f64, eps: f64) -> f64 {
    (ratio * advantage).min(clip_fn(eps, advantage))
}

/// Clipped surrogate for action `action` given the behavior log-probability
/// and the current action distribution.
pub fn actor_loss(old_logprob: f64, new_probs: &[f64], action: usize, advantage: f64, eps: f64) -> Result<f64> {
    if !old_logprob.is_finite() {
        return Err(Error::Contract("behavior probability is zero".into()));
    }
    let new_p = *new_probs
        .get(action)
        .ok_or_else(|| Error::Contract(format!("action {action} outside distribution")))?;
    let ratio = (new_p.ln() - old_logprob).exp();
    Ok(clip_objective(ratio, advantage, eps))
}

/// Gradient of the clipped surrogate w.r.t. the logits. Zero whenever the
/// clipped branch is the active minimum.
pub fn clip_objective_logit_grad(probs: &[f64], action: usize, ratio: f64, advantage: f64, eps: f64) -> Vec<f64> {
    if ratio * advantage > clip_fn(eps, advantage) {
        return vec![0.0; probs.len()];
    }
    let scale = ratio * advantage;
    probs
        .iter()
        .enumerate()
        .map(|(i, &p)| scale * (f64::from(u8::from(i == action)) - p))
        .collect()
}

/// Entropy of a distribution and its gradient w.r.t. the logits.
pub fn entropy_with_logit_grad(probs: &[f64]) -> (f64, Vec<f64>) {
    let h: f64 = -probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>();
    let grad = probs
        .iter()
        .map(|&p| if p > 0.0 { -p * (p.ln() + h) } else { 0.0 })
        .collect();
    (h, grad)
}

pub fn critic_loss(value: f64, target: f64) -> f64 {
    let d = value - target;
    d * d
}

pub fn critic_loss_grad(value: f64, target: f64) -> f64 {
    2.0 * (value - target)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_fn_cases() {
        assert!((clip_fn(0.2, 1.0) - 1.2).abs() < 1e-15);
        assert!((clip_fn(0.2, -1.0) + 0.8).abs() < 1e-15);
        assert_eq!(clip_fn(0.3, 0.0), 0.0);
    }

    #[test]
    fn surrogate_cases() {
        assert_eq!(clip_objective(1.0, 0.7, 0.2), 0.7);
        assert!((clip_objective(2.0, 1.0, 0.2) - 1.2).abs() < 1e-15);
        assert!((clip_objective(0.5, -1.0, 0.2) + 0.8).abs() < 1e-15);
    }

    #[test]
    fn actor_loss_uses_ratio() {
        let probs = [0.25, 0.75];
        let l = actor_loss(0.5f64.ln(), &probs, 1, 1.0, 0.2).unwrap();
        assert!((l - 1.2).abs() < 1e-12);
        assert!(actor_loss(f64::NEG_INFINITY, &probs, 1, 1.0, 0.2).is_err());
        assert!(actor_loss(0.0, &probs, 2, 1.0, 0.2).is_err());
    }

    #[test]
    fn critic_loss_cases() {
        assert_eq!(critic_loss(2.0, 3.0), 1.0);
        assert_eq!(critic_loss(3.0, 3.0), 0.0);
        assert_eq!(critic_loss_grad(2.0, 3.0), -2.0);
    }

    #[test]
    fn clipped_branch_has_no_gradient() {
        let g = clip_objective_logit_grad(&[0.5, 0.5], 0, 1.5, 1.0, 0.2);
        assert_eq!(g, vec![0.0, 0.0]);
        let g = clip_objective_logit_grad(&[0.5, 0.5], 0, 1.0, 1.0, 0.2);
        assert_eq!(g, vec![0.5, -0.5]);
    }

    #[test]
    fn entropy_gradient_matches_finite_differences() {
        let logits = [0.3, -0.2, 1.1];
        let probs = crate::nn::softmax(&logits);
        let (_, grad) = entropy_with_logit_grad(&probs);
        for i in 0..3 {
            let mut lp = logits;
            lp[i] += 1e-6;
            let mut lm = logits;
            lm[i] -= 1e-6;
            let fd = (entropy_with_logit_grad(&crate::nn::softmax(&lp)).0
                - entropy_with_logit_grad(&crate::nn::softmax(&lm)).0)
                / 2e-6;
            assert!((fd - grad[i]).abs() < 1e-8);
        }
    }
}
