//! Bootstrapped sequential PPO updates.
//!
//! Each stored trajectory is replayed from zeroed hidden states. Per-slot
//! clipped-surrogate and squared-error losses are backpropagated through the
//! whole sequence, and Adam is applied once per network per epoch.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use super::advantage::{compute_gae, rewards_to_go};
use super::loss::{clip_objective, clip_objective_logit_grad, critic_loss, critic_loss_grad, entropy_with_logit_grad};
use super::rollout::{AgentTrajectory, Trajectory};
use super::{GaeConfig, PpoConfig};
use crate::error::{Error, Result};
use crate::nn::{log_softmax, ActorParams, AdamState, CriticParams, HiddenState, RecurrentNet, WeightMask};

/// The actors being trained: one network per agent, or one shared network
/// seen by each agent through its own fixed mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ActorSet {
    Independent {
        actors: Vec<ActorParams>,
        optimizers: Vec<AdamState>,
    },
    Shared {
        net: RecurrentNet,
        masks: Vec<WeightMask>,
        optimizer: AdamState,
    },
}

impl ActorSet {
    pub fn independent(actors: Vec<ActorParams>) -> Self {
        let optimizers = actors.iter().map(|a| AdamState::new(&a.net)).collect();
        ActorSet::Independent { actors, optimizers }
    }

    pub fn shared(net: RecurrentNet, masks: Vec<WeightMask>) -> Self {
        let optimizer = AdamState::new(&net);
        ActorSet::Shared { net, masks, optimizer }
    }

    pub fn num_agents(&self) -> usize {
        match self {
            ActorSet::Independent { actors, .. } => actors.len(),
            ActorSet::Shared { masks, .. } => masks.len(),
        }
    }

    /// Parameters each agent actually acts with.
    pub fn agent_nets(&self) -> Vec<Cow<'_, RecurrentNet>> {
        match self {
            ActorSet::Independent { actors, .. } => actors.iter().map(|a| Cow::Borrowed(&a.net)).collect(),
            ActorSet::Shared { net, masks, .. } => masks
                .iter()
                .map(|m| {
                    let mut eff = net.clone();
                    m.apply(&mut eff);
                    Cow::Owned(eff)
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    /// Mean clipped surrogate per agent in the first epoch.
    pub actor_objectives: Vec<f64>,
    /// Mean squared critic error per agent in the first epoch.
    pub critic_losses: Vec<f64>,
    /// Largest `|ratio - 1|` seen in the first epoch.
    pub first_epoch_ratio_deviation: f64,
}

struct AgentBatch<'a> {
    traj: &'a AgentTrajectory,
    advantages: Vec<f64>,
    returns: Vec<f64>,
}

struct ActorGrad {
    grad: RecurrentNet,
    objective: f64,
    max_ratio_dev: f64,
}

/// Gradient of the negated mean surrogate (plus entropy bonus) for one agent.
fn actor_gradient(net: &RecurrentNet, batches: &[AgentBatch<'_>], ppo: &PpoConfig) -> Result<ActorGrad> {
    let total: usize = batches.iter().map(|b| b.traj.actions.len()).sum();
    let scale = 1.0 / total.max(1) as f64;
    let mut grad = net.zeros_like();
    let mut objective = 0.0;
    let mut max_ratio_dev = 0.0f64;
    for batch in batches {
        let traj = batch.traj;
        let unroll = net.unroll(&traj.inputs, &HiddenState::zeros(net.hidden()))?;
        let mut d_out = Vec::with_capacity(unroll.len());
        for (t, logits) in unroll.outputs.iter().enumerate() {
            let logp = log_softmax(logits);
            let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
            let a = traj.actions[t];
            let ratio = (logp[a] - traj.logprobs[t]).exp();
            let adv = batch.advantages[t];
            max_ratio_dev = max_ratio_dev.max((ratio - 1.0).abs());
            objective += clip_objective(ratio, adv, ppo.clip_epsilon) * scale;
            let mut g = clip_objective_logit_grad(&probs, a, ratio, adv, ppo.clip_epsilon);
            if ppo.entropy_coef != 0.0 {
                let (h, hg) = entropy_with_logit_grad(&probs);
                objective += ppo.entropy_coef * h * scale;
                for (gi, hi) in g.iter_mut().zip(hg) {
                    *gi += ppo.entropy_coef * hi;
                }
            }
            // Ascent on the objective is descent on its negation.
            d_out.push(g.into_iter().map(|v| -v * scale).collect());
        }
        grad.add_scaled(&net.backward(&unroll, &d_out)?, 1.0);
    }
    Ok(ActorGrad {
        grad,
        objective,
        max_ratio_dev,
    })
}

/// Mean clipped surrogate of one agent over a frozen batch of trajectories
/// with the given advantages, and the gradient of its negation with respect
/// to the actor parameters.
pub fn actor_objective_gradient(
    net: &RecurrentNet,
    trajectories: &[&AgentTrajectory],
    advantages: &[Vec<f64>],
    ppo: &PpoConfig,
) -> Result<(f64, RecurrentNet)> {
    if trajectories.len() != advantages.len()
        || trajectories
            .iter()
            .zip(advantages)
            .any(|(t, a)| t.actions.len() != a.len())
    {
        return Err(Error::Shape("advantages do not match trajectories".into()));
    }
    let batches: Vec<AgentBatch<'_>> = trajectories
        .iter()
        .zip(advantages)
        .map(|(traj, adv)| AgentBatch {
            traj,
            advantages: adv.clone(),
            returns: Vec::new(),
        })
        .collect();
    let g = actor_gradient(net, &batches, ppo)?;
    Ok((g.objective, g.grad))
}

fn critic_gradient(net: &RecurrentNet, batches: &[AgentBatch<'_>]) -> Result<(RecurrentNet, f64)> {
    let total: usize = batches.iter().map(|b| b.returns.len()).sum();
    let scale = 1.0 / total.max(1) as f64;
    let mut grad = net.zeros_like();
    let mut loss = 0.0;
    for batch in batches {
        let unroll = net.unroll(&batch.traj.inputs, &HiddenState::zeros(net.hidden()))?;
        let d_out: Vec<Vec<f64>> = unroll
            .outputs
            .iter()
            .zip(&batch.returns)
            .map(|(v, &r)| {
                loss += critic_loss(v[0], r) * scale;
                vec![critic_loss_grad(v[0], r) * scale]
            })
            .collect();
        grad.add_scaled(&net.backward(&unroll, &d_out)?, 1.0);
    }
    Ok((grad, loss))
}

fn clip(grad: &mut RecurrentNet, max_norm: Option<f64>) {
    if let Some(m) = max_norm {
        grad.clip_global_norm(m);
    }
}

/// One PPO iteration over freshly collected trajectories.
pub fn update_iteration(
    actors: &mut ActorSet,
    critic: &mut CriticParams,
    critic_opt: &mut AdamState,
    trajectories: &[Trajectory],
    ppo: &PpoConfig,
    gae: &GaeConfig,
    behavior_version: u64,
) -> Result<UpdateStats> {
    let n = actors.num_agents();
    for traj in trajectories {
        if traj.behavior_version != behavior_version {
            return Err(Error::Contract(format!(
                "trajectory from policy version {} used to update version {behavior_version}",
                traj.behavior_version
            )));
        }
        if traj.agents.len() != n {
            return Err(Error::Contract(format!(
                "trajectory has {} agents, expected {n}",
                traj.agents.len()
            )));
        }
        if traj.normalized_rewards.len() != traj.len() {
            return Err(Error::Contract("trajectory rewards are not normalized".into()));
        }
    }

    let mut per_agent: Vec<Vec<AgentBatch<'_>>> = (0..n).map(|_| Vec::new()).collect();
    for traj in trajectories {
        let returns = rewards_to_go(&traj.normalized_rewards, gae.gamma);
        for (agent, at) in traj.agents.iter().enumerate() {
            if at.actions.len() != traj.len() || at.values.len() != traj.len() {
                return Err(Error::Contract("agent sequence length differs from episode".into()));
            }
            let advantages = compute_gae(&at.values, &traj.normalized_rewards, gae.gamma, gae.lambda)?;
            per_agent[agent].push(AgentBatch {
                traj: at,
                advantages,
                returns: returns.clone(),
            });
        }
    }

    let mut stats = UpdateStats::default();
    for epoch in 0..ppo.update_epochs {
        let mut shared_grad: Option<RecurrentNet> = None;
        for (agent, batches) in per_agent.iter().enumerate() {
            let result = match actors {
                ActorSet::Independent { actors, optimizers } => {
                    let mut ag = actor_gradient(&actors[agent].net, batches, ppo)?;
                    clip(&mut ag.grad, ppo.max_grad_norm);
                    optimizers[agent].step(&mut actors[agent].net, &ag.grad, ppo.actor_lr)?;
                    ag
                }
                ActorSet::Shared { net, masks, .. } => {
                    let mut eff = net.clone();
                    masks[agent].apply(&mut eff);
                    let mut ag = actor_gradient(&eff, batches, ppo)?;
                    let mut masked = ag.grad.clone();
                    masks[agent].apply(&mut masked);
                    shared_grad
                        .get_or_insert_with(|| net.zeros_like())
                        .add_scaled(&masked, 1.0);
                    ag.grad = masked;
                    ag
                }
            };
            let (mut cg, closs) = critic_gradient(&critic.net, batches)?;
            clip(&mut cg, ppo.max_grad_norm);
            critic_opt.step(&mut critic.net, &cg, ppo.critic_lr)?;

            if epoch == 0 {
                stats.actor_objectives.push(result.objective);
                stats.critic_losses.push(closs);
                stats.first_epoch_ratio_deviation = stats.first_epoch_ratio_deviation.max(result.max_ratio_dev);
            }
        }
        if let (ActorSet::Shared { net, optimizer, .. }, Some(mut g)) = (&mut *actors, shared_grad) {
            clip(&mut g, ppo.max_grad_norm);
            optimizer.step(net, &g, ppo.actor_lr)?;
        }
    }
    Ok(stats)
}
