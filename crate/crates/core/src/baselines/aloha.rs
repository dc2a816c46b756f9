use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Action;
use crate::error::{Error, Result};
use crate::policy::Policy;

/// Randomized slotted Aloha: transmit with probability `q` on a uniformly
/// chosen channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlohaPolicy {
    pub q: f64,
}

impl AlohaPolicy {
    pub fn new(q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::Config(format!("Aloha transmit probability {q} outside [0, 1]")));
        }
        Ok(Self { q })
    }

    /// Tuned default: one expected contender per channel.
    pub fn tuned(num_agents: usize, num_channels: usize) -> Self {
        Self {
            q: (num_channels as f64 / num_agents as f64).min(1.0),
        }
    }
}

pub fn aloha_act<R: Rng + ?Sized>(q: f64, num_channels: usize, rng: &mut R) -> Action {
    if rng.random::<f64>() < q {
        Action(rng.random_range(1..=num_channels))
    } else {
        Action::IDLE
    }
}

/// Probability that a given agent succeeds in a slot when all `N` agents run
/// Aloha with probability `q` over `K` channels without primary users:
/// `q (1 - q/K)^(N-1)`.
pub fn aloha_success_probability(q: f64, num_agents: usize, num_channels: usize) -> f64 {
    q * (1.0 - q / num_channels as f64).powi(num_agents as i32 - 1)
}

/// Aloha policy for all agents at once.
#[derive(Debug, Clone)]
pub struct AlohaAgents {
    pub policy: AlohaPolicy,
    pub num_channels: usize,
}

impl Policy for AlohaAgents {
    fn begin_episode(&mut self) {}

    fn act(&mut self, inputs: &[[f64; 2]], rng: &mut dyn rand::RngCore) -> Result<Vec<Action>> {
        Ok(inputs
            .iter()
            .map(|_| aloha_act(self.policy.q, self.num_channels, rng))
            .collect())
    }
}
