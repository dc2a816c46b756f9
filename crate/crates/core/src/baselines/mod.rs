//! Comparison methods: slotted Aloha, shared-parameter recurrent DQN,
//! dense actor-critic PPO, and pruning at initialization.

mod aloha;
mod dqn;
mod pai;

pub use aloha::{aloha_act, aloha_success_probability, AlohaAgents, AlohaPolicy};
pub use dqn::{argmax, epsilon_greedy, DqnAgentShared, DqnConfig, DqnLog, GreedyShared, Sequence};
pub use pai::{pai_trainer, random_mask, DEFAULT_PAI_SPARSITY, MASK_STREAM};

use crate::env::EnvConfig;
use crate::error::Result;
use crate::ppo::{ActorCriticTrainer, GaeConfig, PpoConfig};

/// Actor-critic PPO without pruning.
pub fn dense_trainer(
    env: EnvConfig,
    ppo: PpoConfig,
    gae: GaeConfig,
    hidden: usize,
    seed: u64,
) -> Result<ActorCriticTrainer> {
    ActorCriticTrainer::new(env, ppo, gae, None, hidden, seed)
}
