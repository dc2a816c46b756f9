//! Slotted multi-channel spectrum access simulator.
//!
//! `N` secondary users share `K` orthogonal channels. In every slot each user
//! either stays silent (action 0) or transmits on one channel. A transmission
//! succeeds only if no other user picked the same channel and the channel is
//! not held by a primary user. A successful user `n` on channel `k` achieves
//! the linear SNR `beta[n][k]`, and every user receives the same reward: the
//! sum over users of `log2(1 + achieved_snr)`.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub num_agents: usize,
    pub num_channels: usize,
    pub horizon: usize,
    pub snr_low: f64,
    pub snr_high: f64,
    /// Per-channel probability that a primary user holds the channel for the episode.
    pub pu_probs: Vec<f64>,
}

impl EnvConfig {
    /// Setup without primary users.
    pub fn new(num_agents: usize, num_channels: usize, horizon: usize) -> Self {
        Self {
            num_agents,
            num_channels,
            horizon,
            snr_low: 30.0,
            snr_high: 40.0,
            pu_probs: vec![0.0; num_channels],
        }
    }

    pub fn with_pu_prob(mut self, prob: f64) -> Self {
        self.pu_probs = vec![prob; self.num_channels];
        self
    }

    pub fn with_snr_range(mut self, low: f64, high: f64) -> Self {
        self.snr_low = low;
        self.snr_high = high;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_agents == 0 || self.num_channels == 0 || self.horizon == 0 {
            return Err(Error::Config(format!(
                "agents, channels and horizon must be positive (got N={}, K={}, T={})",
                self.num_agents, self.num_channels, self.horizon
            )));
        }
        if !(self.snr_low > 0.0 && self.snr_low <= self.snr_high && self.snr_high.is_finite()) {
            return Err(Error::Config(format!(
                "SNR bounds must satisfy 0 < low <= high (got [{}, {}])",
                self.snr_low, self.snr_high
            )));
        }
        if self.pu_probs.len() != self.num_channels {
            return Err(Error::Config(format!(
                "expected {} primary-user probabilities, got {}",
                self.num_channels,
                self.pu_probs.len()
            )));
        }
        if let Some(p) = self.pu_probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Config(format!("primary-user probability {p} outside [0, 1]")));
        }
        Ok(())
    }
}

/// Linear SNR of every (agent, channel) pair, fixed for one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrTable {
    num_channels: usize,
    beta: Vec<f64>,
}

impl SnrTable {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let num_channels = rows.first().map_or(0, Vec::len);
        if num_channels == 0 || rows.iter().any(|r| r.len() != num_channels) {
            return Err(Error::Shape("SNR table rows must be non-empty and equal length".into()));
        }
        if rows.iter().flatten().any(|&b| !(b > 0.0 && b.is_finite())) {
            return Err(Error::Config("SNR entries must be positive and finite".into()));
        }
        Ok(Self {
            num_channels,
            beta: rows.into_iter().flatten().collect(),
        })
    }

    /// SNR of `agent` on 1-based `channel`.
    pub fn get(&self, agent: usize, channel: usize) -> f64 {
        self.beta[agent * self.num_channels + channel - 1]
    }

    pub fn num_agents(&self) -> usize {
        self.beta.len() / self.num_channels
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    pub fn values(&self) -> &[f64] {
        &self.beta
    }
}

/// Channel choice of one agent: 0 is silent, `1..=K` selects a channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Action(pub usize);

impl Action {
    pub const IDLE: Action = Action(0);

    pub fn channel(self) -> Option<usize> {
        (self.0 > 0).then_some(self.0)
    }
}

/// Feedback received after a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Observation {
    /// No attempt was made (also the dummy observation before the first slot).
    #[default]
    Idle,
    Ack,
    Nack,
    PrimaryUser,
}

impl Observation {
    pub fn value(self) -> i8 {
        match self {
            Observation::Idle => 0,
            Observation::Ack => 1,
            Observation::Nack => -1,
            Observation::PrimaryUser => -2,
        }
    }

    pub fn from_value(v: i8) -> Option<Self> {
        match v {
            0 => Some(Observation::Idle),
            1 => Some(Observation::Ack),
            -1 => Some(Observation::Nack),
            -2 => Some(Observation::PrimaryUser),
            _ => None,
        }
    }
}

/// Network input for one agent: the previous action and its observation.
pub fn input_pair(action: Action, obs: Observation) -> [f64; 2] {
    [action.0 as f64, f64::from(obs.value())]
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs: Vec<Observation>,
    pub achieved_snr: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub actions: Vec<Action>,
    pub obs: Vec<Observation>,
    pub achieved_snr: Vec<f64>,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    config: EnvConfig,
    snr: SnrTable,
    pu_occupied: Vec<bool>,
    t: usize,
    last_obs: Vec<Observation>,
    last_actions: Vec<Action>,
}

impl EnvState {
    /// Starts a new episode: draws the SNR table and primary-user occupancy.
    pub fn reset<R: Rng + ?Sized>(config: &EnvConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let (n, k) = (config.num_agents, config.num_channels);
        let beta = (0..n * k)
            .map(|_| {
                if config.snr_low == config.snr_high {
                    config.snr_low
                } else {
                    rng.random_range(config.snr_low..=config.snr_high)
                }
            })
            .collect();
        let pu_occupied = config
            .pu_probs
            .iter()
            .map(|&p| p > 0.0 && rng.random::<f64>() < p)
            .collect();
        Ok(Self {
            config: config.clone(),
            snr: SnrTable { num_channels: k, beta },
            pu_occupied,
            t: 0,
            last_obs: vec![Observation::Idle; n],
            last_actions: vec![Action::IDLE; n],
        })
    }

    /// Builds a state with an explicit SNR table and occupancy.
    pub fn with_world(config: &EnvConfig, snr: SnrTable, pu_occupied: Vec<bool>) -> Result<Self> {
        config.validate()?;
        if snr.num_agents() != config.num_agents || snr.num_channels() != config.num_channels {
            return Err(Error::Shape(format!(
                "SNR table is {}x{}, config wants {}x{}",
                snr.num_agents(),
                snr.num_channels(),
                config.num_agents,
                config.num_channels
            )));
        }
        if pu_occupied.len() != config.num_channels {
            return Err(Error::Shape("occupancy length must equal the channel count".into()));
        }
        let n = config.num_agents;
        Ok(Self {
            config: config.clone(),
            snr,
            pu_occupied,
            t: 0,
            last_obs: vec![Observation::Idle; n],
            last_actions: vec![Action::IDLE; n],
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn snr(&self) -> &SnrTable {
        &self.snr
    }

    pub fn pu_occupied(&self) -> &[bool] {
        &self.pu_occupied
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn is_done(&self) -> bool {
        self.t >= self.config.horizon
    }

    pub fn last_obs(&self) -> &[Observation] {
        &self.last_obs
    }

    pub fn last_actions(&self) -> &[Action] {
        &self.last_actions
    }

    /// Current network input of every agent.
    pub fn inputs(&self) -> Vec<[f64; 2]> {
        self.last_actions
            .iter()
            .zip(&self.last_obs)
            .map(|(&a, &o)| input_pair(a, o))
            .collect()
    }

    pub fn step(&mut self, actions: &[Action]) -> Result<StepResult> {
        if self.is_done() {
            return Err(Error::State(format!("episode already ended at slot {}", self.t)));
        }
        let (n, k) = (self.config.num_agents, self.config.num_channels);
        if actions.len() != n {
            return Err(Error::Contract(format!("expected {n} actions, got {}", actions.len())));
        }
        if let Some(a) = actions.iter().find(|a| a.0 > k) {
            return Err(Error::Contract(format!("action {} outside 0..={k}", a.0)));
        }

        let mut contenders = vec![0usize; k + 1];
        for a in actions {
            contenders[a.0] += 1;
        }

        let mut obs = Vec::with_capacity(n);
        let mut achieved_snr = Vec::with_capacity(n);
        for (agent, &a) in actions.iter().enumerate() {
            let (o, snr) = match a.channel() {
                None => (Observation::Idle, 0.0),
                Some(ch) if self.pu_occupied[ch - 1] => (Observation::PrimaryUser, 0.0),
                Some(ch) if contenders[ch] > 1 => (Observation::Nack, 0.0),
                Some(ch) => (Observation::Ack, self.snr.get(agent, ch)),
            };
            obs.push(o);
            achieved_snr.push(snr);
        }
        let reward = slot_reward(&achieved_snr);

        self.t += 1;
        self.last_actions.copy_from_slice(actions);
        self.last_obs.clone_from(&obs);
        Ok(StepResult {
            obs,
            achieved_snr,
            reward,
            done: self.is_done(),
        })
    }
}

/// Joint throughput of one slot.
pub fn slot_reward(achieved_snr: &[f64]) -> f64 {
    achieved_snr.iter().map(|b| (1.0 + b).log2()).sum()
}

/// Record of a complete episode, one entry per slot.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub slots: Vec<SlotRecord>,
}

impl EpisodeTrace {
    pub fn push(&mut self, actions: &[Action], result: &StepResult) {
        self.slots.push(SlotRecord {
            actions: actions.to_vec(),
            obs: result.obs.clone(),
            achieved_snr: result.achieved_snr.clone(),
            reward: result.reward,
        });
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn num_agents(&self) -> usize {
        self.slots.first().map_or(0, |s| s.actions.len())
    }

    /// Sum of achieved SNR of one agent over the episode.
    pub fn cumulative_snr(&self, agent: usize) -> Result<f64> {
        if agent >= self.num_agents() {
            return Err(Error::Contract(format!(
                "agent {agent} out of range for {} agents",
                self.num_agents()
            )));
        }
        Ok(self
            .slots
            .iter()
            .filter(|s| s.obs[agent] == Observation::Ack)
            .map(|s| s.achieved_snr[agent])
            .sum())
    }

    /// Total joint throughput `sum_t sum_n log2(1 + snr)`.
    pub fn throughput(&self) -> f64 {
        self.slots.iter().map(|s| slot_reward(&s.achieved_snr)).sum()
    }

    pub fn total_reward(&self) -> f64 {
        self.slots.iter().map(|s| s.reward).sum()
    }

    /// Writes one CSV row per slot: `t, a_1..a_N, o_1..o_N, snr_1..snr_N, r`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let n = self.num_agents();
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("a{i}")));
        header.extend((1..=n).map(|i| format!("o{i}")));
        header.extend((1..=n).map(|i| format!("snr{i}")));
        header.push("r".into());
        w.write_record(&header)?;
        for (t, slot) in self.slots.iter().enumerate() {
            let mut row = vec![(t + 1).to_string()];
            row.extend(slot.actions.iter().map(|a| a.0.to_string()));
            row.extend(slot.obs.iter().map(|o| o.value().to_string()));
            row.extend(slot.achieved_snr.iter().map(|b| b.to_string()));
            row.push(slot.reward.to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("trace", e))?;
        Ok(())
    }
}
