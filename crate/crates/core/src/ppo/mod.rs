//! Independent actors with a global critic, trained by clipped PPO.

mod advantage;
mod loss;
mod normalizer;
mod rollout;
mod update;

pub use advantage::{compute_gae, rewards_to_go};
pub use loss::{
    actor_loss, clip_fn, clip_objective, clip_objective_logit_grad, critic_loss, critic_loss_grad,
    entropy_with_logit_grad,
};
pub use normalizer::RewardNormalizer;
pub use rollout::{collect_episode, normalize_rewards, AgentTrajectory, Trajectory};
pub use update::{actor_objective_gradient, update_iteration, ActorSet, UpdateStats};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::nn::{ActorParams, AdamState, CriticParams};
use crate::pruning::{maybe_prune, mean_actual_sparsity, PruneConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub clip_epsilon: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub episodes_per_iteration: usize,
    pub update_epochs: usize,
    pub entropy_coef: f64,
    /// Global-norm gradient clipping threshold; `None` disables clipping.
    pub max_grad_norm: Option<f64>,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip_epsilon: 0.2,
            actor_lr: 1e-4,
            critic_lr: 5e-5,
            episodes_per_iteration: 1,
            update_epochs: 1,
            entropy_coef: 0.0,
            max_grad_norm: Some(0.5),
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_epsilon > 0.0) {
            return Err(Error::Config("clip epsilon must be positive".into()));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.episodes_per_iteration == 0 || self.update_epochs == 0 {
            return Err(Error::Config(
                "episodes per iteration and update epochs must be at least 1".into(),
            ));
        }
        if matches!(self.max_grad_norm, Some(m) if !(m > 0.0)) {
            return Err(Error::Config("gradient clip norm must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaeConfig {
    pub gamma: f64,
    pub lambda: f64,
}

impl Default for GaeConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda: 0.95,
        }
    }
}

impl GaeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("discount {} outside (0, 1]", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("GAE lambda {} outside [0, 1]", self.lambda)));
        }
        Ok(())
    }
}

/// Per-iteration training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub actor_objectives: Vec<f64>,
    pub critic_losses: Vec<f64>,
    pub mean_raw_reward: f64,
    pub normalizer: RewardNormalizer,
    pub pruned: bool,
    pub sparsity: f64,
}

/// Complete training state of an actor-critic run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorCriticTrainer {
    pub env: EnvConfig,
    pub ppo: PpoConfig,
    pub gae: GaeConfig,
    pub prune: Option<PruneConfig>,
    pub actors: ActorSet,
    pub critic: CriticParams,
    pub critic_opt: AdamState,
    pub normalizer: RewardNormalizer,
    pub rng: ChaCha8Rng,
    /// Number of completed iterations.
    pub iteration: usize,
}

/// RNG stream used to initialize networks.
pub const INIT_STREAM: u64 = 0;
/// RNG stream used for environment draws and action sampling during training.
pub const TRAIN_STREAM: u64 = 1;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl ActorCriticTrainer {
    /// Independent actors, one per agent, plus the global critic.
    pub fn new(
        env: EnvConfig,
        ppo: PpoConfig,
        gae: GaeConfig,
        prune: Option<PruneConfig>,
        hidden: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut init = stream_rng(seed, INIT_STREAM);
        let actors = (0..env.num_agents)
            .map(|_| ActorParams::init(&mut init, env.num_channels, hidden))
            .collect();
        let critic = CriticParams::init(&mut init, hidden);
        Self::with_actors(env, ppo, gae, prune, ActorSet::independent(actors), critic, seed)
    }

    pub fn with_actors(
        env: EnvConfig,
        ppo: PpoConfig,
        gae: GaeConfig,
        prune: Option<PruneConfig>,
        actors: ActorSet,
        critic: CriticParams,
        seed: u64,
    ) -> Result<Self> {
        env.validate()?;
        ppo.validate()?;
        gae.validate()?;
        if let Some(p) = &prune {
            p.validate()?;
            if !matches!(actors, ActorSet::Independent { .. }) {
                return Err(Error::Config("gradual pruning needs independent actors".into()));
            }
            if p.schedules.len() != env.num_agents {
                return Err(Error::Config(format!(
                    "{} pruning schedules for {} agents",
                    p.schedules.len(),
                    env.num_agents
                )));
            }
        }
        if actors.num_agents() != env.num_agents {
            return Err(Error::Config("actor count differs from agent count".into()));
        }
        let critic_opt = AdamState::new(&critic.net);
        Ok(Self {
            env,
            ppo,
            gae,
            prune,
            actors,
            critic,
            critic_opt,
            normalizer: RewardNormalizer::new(),
            rng: stream_rng(seed, TRAIN_STREAM),
            iteration: 0,
        })
    }

    pub fn mean_sparsity(&self) -> f64 {
        match &self.actors {
            ActorSet::Independent { actors, .. } => mean_actual_sparsity(actors),
            ActorSet::Shared { masks, .. } => masks.iter().map(|m| 1.0 - m.density()).sum::<f64>() / masks.len() as f64,
        }
    }

    /// Collects fresh trajectories with the current (behavior) parameters.
    pub fn collect(&mut self) -> Result<Vec<Trajectory>> {
        let version = self.iteration as u64;
        let nets = self.actors.agent_nets();
        let refs: Vec<_> = nets.iter().map(|c| c.as_ref()).collect();
        let mut trajs = Vec::with_capacity(self.ppo.episodes_per_iteration);
        for _ in 0..self.ppo.episodes_per_iteration {
            let mut traj = collect_episode(&self.env, &refs, &self.critic.net, version, &mut self.rng)?;
            normalize_rewards(&mut traj, &mut self.normalizer);
            trajs.push(traj);
        }
        Ok(trajs)
    }

    /// Runs iteration `i = iteration + 1`: sample, update, then prune.
    pub fn train_iteration(&mut self) -> Result<IterationLog> {
        let trajs = self.collect()?;
        let stats = update_iteration(
            &mut self.actors,
            &mut self.critic,
            &mut self.critic_opt,
            &trajs,
            &self.ppo,
            &self.gae,
            self.iteration as u64,
        )?;
        self.iteration += 1;
        let mut pruned = false;
        if let (Some(cfg), ActorSet::Independent { actors, .. }) = (&self.prune, &mut self.actors) {
            pruned = maybe_prune(self.iteration, cfg, actors)?;
        }
        let mean_raw_reward = trajs.iter().map(|t| t.rewards.iter().sum::<f64>()).sum::<f64>() / trajs.len() as f64;
        Ok(IterationLog {
            iteration: self.iteration,
            actor_objectives: stats.actor_objectives,
            critic_losses: stats.critic_losses,
            mean_raw_reward,
            normalizer: self.normalizer.clone(),
            pruned,
            sparsity: self.mean_sparsity(),
        })
    }
}
