use rand::Rng;
use serde::{Deserialize, Serialize};

use super::normalizer::RewardNormalizer;
use crate::env::{Action, EnvConfig, EnvState, EpisodeTrace};
use crate::error::{Error, Result};
use crate::nn::{log_softmax, sample_categorical, HiddenState, RecurrentNet};

/// One agent's view of an episode.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentTrajectory {
    /// Network input `[a_{t-1}, o_{t-1}]` at each slot.
    pub inputs: Vec<[f64; 2]>,
    pub actions: Vec<usize>,
    /// Log-probability of the taken action under the behavior policy.
    pub logprobs: Vec<f64>,
    /// Critic estimate along this agent's own hidden stream.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Identifies the parameter snapshot that generated the data.
    pub behavior_version: u64,
    pub agents: Vec<AgentTrajectory>,
    /// Joint reward of each slot (identical for all agents).
    pub rewards: Vec<f64>,
    /// Normalized rewards; empty until [`normalize_rewards`] runs.
    pub normalized_rewards: Vec<f64>,
    pub trace: EpisodeTrace,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Plays one episode with the given actors, recording everything PPO needs.
/// Hidden states of actors and of every agent's critic stream start at zero.
pub fn collect_episode<R: Rng>(
    env: &EnvConfig,
    actors: &[&RecurrentNet],
    critic: &RecurrentNet,
    behavior_version: u64,
    rng: &mut R,
) -> Result<Trajectory> {
    if actors.len() != env.num_agents {
        return Err(Error::Contract(format!(
            "{} actors for {} agents",
            actors.len(),
            env.num_agents
        )));
    }
    if let Some(a) = actors.iter().find(|a| a.outputs() != env.num_channels + 1) {
        return Err(Error::Contract(format!(
            "actor has {} outputs, expected {}",
            a.outputs(),
            env.num_channels + 1
        )));
    }
    let mut state = EnvState::reset(env, rng)?;
    let n = env.num_agents;
    let mut actor_h: Vec<HiddenState> = actors.iter().map(|a| HiddenState::zeros(a.hidden())).collect();
    let mut critic_h = vec![HiddenState::zeros(critic.hidden()); n];
    let mut agents = vec![AgentTrajectory::default(); n];
    let mut rewards = Vec::with_capacity(env.horizon);
    let mut trace = EpisodeTrace::default();

    while !state.is_done() {
        let inputs = state.inputs();
        let mut actions = Vec::with_capacity(n);
        for agent in 0..n {
            let y = &inputs[agent];
            let (logits, next) = actors[agent].forward(y, &actor_h[agent])?;
            actor_h[agent] = next;
            let logp = log_softmax(&logits);
            let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
            let a = sample_categorical(&probs, rng);
            let (value, next_c) = critic.forward(y, &critic_h[agent])?;
            critic_h[agent] = next_c;

            let rec = &mut agents[agent];
            rec.inputs.push(*y);
            rec.actions.push(a);
            rec.logprobs.push(logp[a]);
            rec.values.push(value[0]);
            actions.push(Action(a));
        }
        let result = state.step(&actions)?;
        rewards.push(result.reward);
        trace.push(&actions, &result);
    }
    Ok(Trajectory {
        behavior_version,
        agents,
        rewards,
        normalized_rewards: Vec::new(),
        trace,
    })
}

/// Normalizes the trajectory's rewards with running statistics updated from
/// the raw rewards in arrival order.
pub fn normalize_rewards(traj: &mut Trajectory, normalizer: &mut RewardNormalizer) {
    traj.normalized_rewards = normalizer.normalize_stream(&traj.rewards);
}
