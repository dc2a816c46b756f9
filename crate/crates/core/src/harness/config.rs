use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{AlohaPolicy, DqnConfig};
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::ppo::{GaeConfig, PpoConfig};
use crate::pruning::{PruneConfig, ScheduleKind, SparsitySchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Setup {
    /// No primary users.
    A,
    /// Every channel held by a primary user with probability `pu_prob`.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    IagcPpoPruned,
    IagcPpoDense,
    DqnShared,
    Pai,
    Aloha,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::IagcPpoPruned => "iagc_ppo_pruned",
            Algorithm::IagcPpoDense => "iagc_ppo_dense",
            Algorithm::DqnShared => "dqn_shared",
            Algorithm::Pai => "pai",
            Algorithm::Aloha => "aloha",
        }
    }
}

/// Flat experiment description; every field has a default so a config file
/// only lists what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: Option<String>,
    pub setup: Setup,
    pub algorithm: Algorithm,
    pub scheduler: ScheduleKind,

    pub num_agents: usize,
    pub num_channels: usize,
    pub horizon: usize,
    pub iterations: usize,
    pub snr_low: f64,
    pub snr_high: f64,
    pub pu_prob: f64,
    pub hidden: usize,

    pub clip_epsilon: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub episodes_per_iteration: usize,
    pub update_epochs: usize,
    pub entropy_coef: f64,
    /// Global gradient-norm clip; 0 disables clipping.
    pub grad_clip: f64,
    pub gamma: f64,
    pub gae_lambda: f64,

    pub p_initial: f64,
    pub p_final: f64,
    /// Optional per-agent targets overriding `p_final`.
    pub p_final_per_agent: Option<Vec<f64>>,
    pub prune_start: usize,
    /// Iteration at which the schedule reaches its target; defaults to `iterations`.
    pub prune_end: Option<usize>,
    pub prune_interval: usize,

    /// Aloha transmit probability; defaults to `K / N`.
    pub aloha_q: Option<f64>,

    pub dqn_lr: f64,
    pub dqn_batch_size: usize,
    pub dqn_replay_capacity: usize,
    pub dqn_target_sync: u64,
    pub dqn_eps_end: f64,
    /// Fraction of training over which exploration anneals to `dqn_eps_end`.
    pub dqn_eps_fraction: f64,

    pub pai_sparsity: f64,

    pub seeds: Vec<u64>,
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub eval_at_start: bool,
    pub checkpoint_every: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let ppo = PpoConfig::default();
        let gae = GaeConfig::default();
        Self {
            name: None,
            setup: Setup::A,
            algorithm: Algorithm::IagcPpoPruned,
            scheduler: ScheduleKind::Harmonic,
            num_agents: 10,
            num_channels: 5,
            horizon: 100,
            iterations: 1000,
            snr_low: 30.0,
            snr_high: 40.0,
            pu_prob: 0.2,
            hidden: 128,
            clip_epsilon: ppo.clip_epsilon,
            actor_lr: ppo.actor_lr,
            critic_lr: ppo.critic_lr,
            episodes_per_iteration: ppo.episodes_per_iteration,
            update_epochs: ppo.update_epochs,
            entropy_coef: ppo.entropy_coef,
            grad_clip: ppo.max_grad_norm.unwrap_or(0.0),
            gamma: gae.gamma,
            gae_lambda: gae.lambda,
            p_initial: 0.0,
            p_final: 0.95,
            p_final_per_agent: None,
            prune_start: 0,
            prune_end: None,
            prune_interval: 5,
            aloha_q: None,
            dqn_lr: 1e-4,
            dqn_batch_size: 4,
            dqn_replay_capacity: 10_000,
            dqn_target_sync: 100,
            dqn_eps_end: 0.05,
            dqn_eps_fraction: 0.5,
            pai_sparsity: 0.5,
            seeds: (0..10).collect(),
            eval_every: 10,
            eval_episodes: 100,
            eval_at_start: false,
            checkpoint_every: 100,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Applies `key=value` overrides; values use TOML syntax, bare words are
    /// read as strings.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut table = toml::Table::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for item in overrides {
            let item = item.as_ref();
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{item}' is not key=value")))?;
            let (key, raw) = (key.trim(), raw.trim());
            let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.to_string()));
            table.insert(key.to_string(), value);
        }
        let cfg: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn run_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            let mut s = self.algorithm.name().to_string();
            if self.algorithm == Algorithm::IagcPpoPruned {
                s.push('_');
                s.push_str(&self.scheduler.to_string());
            }
            s.push_str(match self.setup {
                Setup::A => "_A",
                Setup::B => "_B",
            });
            s
        })
    }

    pub fn env_config(&self) -> EnvConfig {
        let env = EnvConfig::new(self.num_agents, self.num_channels, self.horizon)
            .with_snr_range(self.snr_low, self.snr_high);
        match self.setup {
            Setup::A => env,
            Setup::B => env.with_pu_prob(self.pu_prob),
        }
    }

    pub fn ppo_config(&self) -> PpoConfig {
        PpoConfig {
            clip_epsilon: self.clip_epsilon,
            actor_lr: self.actor_lr,
            critic_lr: self.critic_lr,
            episodes_per_iteration: self.episodes_per_iteration,
            update_epochs: self.update_epochs,
            entropy_coef: self.entropy_coef,
            max_grad_norm: (self.grad_clip > 0.0).then_some(self.grad_clip),
        }
    }

    pub fn gae_config(&self) -> GaeConfig {
        GaeConfig {
            gamma: self.gamma,
            lambda: self.gae_lambda,
        }
    }

    pub fn schedule_for(&self, p_final: f64) -> SparsitySchedule {
        let mut s = SparsitySchedule::new(
            self.scheduler,
            p_final,
            self.prune_start,
            self.prune_end.unwrap_or(self.iterations),
        );
        s.p_initial = self.p_initial;
        s
    }

    pub fn prune_config(&self) -> PruneConfig {
        let targets = self
            .p_final_per_agent
            .clone()
            .unwrap_or_else(|| vec![self.p_final; self.num_agents]);
        PruneConfig {
            schedules: targets.into_iter().map(|p| self.schedule_for(p)).collect(),
            interval: self.prune_interval,
        }
    }

    pub fn dqn_config(&self) -> DqnConfig {
        DqnConfig {
            lr: self.dqn_lr,
            gamma: self.gamma,
            replay_capacity: self.dqn_replay_capacity,
            batch_size: self.dqn_batch_size,
            updates_per_iteration: 1,
            target_sync_every: self.dqn_target_sync,
            eps_start: 1.0,
            eps_end: self.dqn_eps_end,
            eps_decay_iterations: (self.iterations as f64 * self.dqn_eps_fraction).round() as usize,
            max_grad_norm: (self.grad_clip > 0.0).then_some(self.grad_clip),
        }
    }

    pub fn aloha_policy(&self) -> Result<AlohaPolicy> {
        match self.aloha_q {
            Some(q) => AlohaPolicy::new(q),
            None => Ok(AlohaPolicy::tuned(self.num_agents, self.num_channels)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.env_config().validate()?;
        if self.hidden == 0 {
            return Err(Error::Config("hidden width must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.eval_every == 0 || self.eval_episodes == 0 {
            return Err(Error::Config("eval_every and eval_episodes must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.pu_prob) {
            return Err(Error::Config(format!("pu_prob {} outside [0, 1]", self.pu_prob)));
        }
        self.ppo_config().validate()?;
        self.gae_config().validate()?;
        if let Some(per_agent) = &self.p_final_per_agent {
            if per_agent.len() != self.num_agents {
                return Err(Error::Config(format!(
                    "p_final_per_agent lists {} targets for {} agents",
                    per_agent.len(),
                    self.num_agents
                )));
            }
        }
        match self.algorithm {
            Algorithm::IagcPpoPruned => self.prune_config().validate()?,
            Algorithm::DqnShared => self.dqn_config().validate()?,
            Algorithm::Aloha => {
                self.aloha_policy()?;
            }
            Algorithm::Pai if !(0.0..1.0).contains(&self.pai_sparsity) => {
                return Err(Error::Config("pai_sparsity must lie in [0, 1)".into()));
            }
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_reference_setup() {
        let c = ExperimentConfig::default();
        assert_eq!(
            (c.num_agents, c.num_channels, c.horizon, c.iterations),
            (10, 5, 100, 1000)
        );
        assert_eq!(
            (c.clip_epsilon, c.gamma, c.actor_lr, c.critic_lr),
            (0.2, 0.99, 1e-4, 5e-5)
        );
        assert_eq!(
            (c.p_final, c.prune_interval, c.eval_every, c.eval_episodes),
            (0.95, 5, 10, 100)
        );
        assert_eq!(c.seeds.len(), 10);
        c.validate().unwrap();
    }

    #[test]
    fn parses_partial_file_and_overrides() {
        let c = ExperimentConfig::from_toml_str(
            "algorithm = \"aloha\"\nsetup = \"B\"\nnum_agents = 4\nnum_channels = 2\nseeds = [1, 2]\n",
        )
        .unwrap();
        assert_eq!(c.algorithm, Algorithm::Aloha);
        assert_eq!(c.env_config().pu_probs, vec![0.2, 0.2]);
        let c2 = c
            .with_overrides(&["horizon=50", "scheduler=linear", "seeds=[7]", "aloha_q = 0.3"])
            .unwrap();
        assert_eq!(c2.horizon, 50);
        assert_eq!(c2.scheduler, ScheduleKind::Linear);
        assert_eq!(c2.seeds, vec![7]);
        assert_eq!(c2.aloha_policy().unwrap().q, 0.3);
        assert_eq!(c2.run_name(), "aloha_B");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::from_toml_str("bogus_key = 1").is_err());
        assert!(ExperimentConfig::from_toml_str("num_agents = 0").is_err());
        assert!(ExperimentConfig::default().with_overrides(&["noequals"]).is_err());
        assert!(ExperimentConfig::default().with_overrides(&["p_final=1.5"]).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }
}
