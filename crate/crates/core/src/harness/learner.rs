use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{Algorithm, ExperimentConfig};
use super::records::TrainRecord;
use crate::baselines::{dense_trainer, pai_trainer, AlohaAgents, DqnAgentShared, GreedyShared};
use crate::error::Result;
use crate::policy::{mean_episodic_reward, run_episode, Policy, SampledActors};
use crate::ppo::{stream_rng, ActorCriticTrainer};

/// Evaluation episodes after iteration `i` draw from stream `EVAL_STREAM_BASE + i`.
pub const EVAL_STREAM_BASE: u64 = 1000;

/// Trainable state of any supported method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Learner {
    ActorCritic(Box<ActorCriticTrainer>),
    Dqn(Box<DqnAgentShared>),
    /// Aloha has no parameters; only the iteration counter advances.
    Aloha {
        iteration: usize,
    },
}

impl Learner {
    pub fn new(config: &ExperimentConfig, seed: u64) -> Result<Self> {
        let env = config.env_config();
        let (ppo, gae, hidden) = (config.ppo_config(), config.gae_config(), config.hidden);
        Ok(match config.algorithm {
            Algorithm::IagcPpoPruned => Learner::ActorCritic(Box::new(ActorCriticTrainer::new(
                env,
                ppo,
                gae,
                Some(config.prune_config()),
                hidden,
                seed,
            )?)),
            Algorithm::IagcPpoDense => Learner::ActorCritic(Box::new(dense_trainer(env, ppo, gae, hidden, seed)?)),
            Algorithm::Pai => {
                Learner::ActorCritic(Box::new(pai_trainer(env, ppo, gae, hidden, config.pai_sparsity, seed)?))
            }
            Algorithm::DqnShared => {
                Learner::Dqn(Box::new(DqnAgentShared::new(env, config.dqn_config(), hidden, seed)?))
            }
            Algorithm::Aloha => {
                config.aloha_policy()?;
                Learner::Aloha { iteration: 0 }
            }
        })
    }

    /// Completed training iterations.
    pub fn iteration(&self) -> usize {
        match self {
            Learner::ActorCritic(t) => t.iteration,
            Learner::Dqn(d) => d.iteration,
            Learner::Aloha { iteration } => *iteration,
        }
    }

    pub fn num_agents(&self) -> Option<usize> {
        match self {
            Learner::ActorCritic(t) => Some(t.env.num_agents),
            Learner::Dqn(d) => Some(d.env.num_agents),
            Learner::Aloha { .. } => None,
        }
    }

    pub fn num_channels(&self) -> Option<usize> {
        match self {
            Learner::ActorCritic(t) => Some(t.env.num_channels),
            Learner::Dqn(d) => Some(d.env.num_channels),
            Learner::Aloha { .. } => None,
        }
    }

    pub fn sparsity(&self) -> f64 {
        match self {
            Learner::ActorCritic(t) => t.mean_sparsity(),
            Learner::Dqn(_) | Learner::Aloha { .. } => 0.0,
        }
    }

    pub fn train_iteration(&mut self) -> Result<TrainRecord> {
        match self {
            Learner::ActorCritic(t) => {
                let log = t.train_iteration()?;
                let n = log.critic_losses.len().max(1) as f64;
                Ok(TrainRecord {
                    iteration: log.iteration,
                    train_reward: log.mean_raw_reward,
                    sparsity: log.sparsity,
                    loss: log.critic_losses.iter().sum::<f64>() / n,
                    pruned: log.pruned,
                })
            }
            Learner::Dqn(d) => {
                let log = d.train_iteration()?;
                Ok(TrainRecord {
                    iteration: log.iteration,
                    train_reward: log.mean_raw_reward,
                    sparsity: 0.0,
                    loss: log.loss.unwrap_or(f64::NAN),
                    pruned: false,
                })
            }
            Learner::Aloha { iteration } => {
                *iteration += 1;
                Ok(TrainRecord {
                    iteration: *iteration,
                    train_reward: f64::NAN,
                    sparsity: 0.0,
                    loss: f64::NAN,
                    pruned: false,
                })
            }
        }
    }

    /// Mean episodic reward over `episodes` fresh episodes. Actor-critic
    /// policies are sampled; the shared DQN acts epsilon-greedily at its final
    /// exploration rate, since identical greedy clones never break symmetry.
    /// Never mutates the learner.
    pub fn evaluate<R: Rng>(&self, config: &ExperimentConfig, episodes: usize, rng: &mut R) -> Result<f64> {
        let env = config.env_config();
        let nets;
        let mut policy: Box<dyn Policy + '_>;
        match self {
            Learner::ActorCritic(t) => {
                nets = t.actors.agent_nets();
                policy = Box::new(SampledActors::new(nets.iter().map(|c| c.as_ref()).collect()));
            }
            Learner::Dqn(d) => {
                policy = Box::new(GreedyShared::new(&d.q, env.num_agents, d.config.eps_end));
            }
            Learner::Aloha { .. } => {
                policy = Box::new(AlohaAgents {
                    policy: config.aloha_policy()?,
                    num_channels: env.num_channels,
                });
            }
        }
        let mut total = 0.0;
        for _ in 0..episodes {
            let trace = run_episode(&env, policy.as_mut(), rng)?;
            total += mean_episodic_reward(&trace);
        }
        Ok(total / episodes as f64)
    }

    /// Evaluation with the stream reserved for the current iteration.
    pub fn evaluate_at_current(&self, config: &ExperimentConfig, episodes: usize, seed: u64) -> Result<f64> {
        let mut rng = stream_rng(seed, EVAL_STREAM_BASE + self.iteration() as u64);
        self.evaluate(config, episodes, &mut rng)
    }
}
