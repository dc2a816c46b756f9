//! Recurrent DQN with one Q-network shared by every agent.
//!
//! Agents act epsilon-greedily with the shared network and their own hidden
//! streams. Whole agent-episodes go into an episodic replay buffer; updates
//! replay sampled sequences from zeroed hidden states against a periodically
//! synchronized target network.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, EnvConfig, EnvState};
use crate::error::{Error, Result};
use crate::nn::{AdamState, HiddenState, RecurrentNet};
use crate::policy::Policy;
use crate::ppo::{stream_rng, RewardNormalizer, INIT_STREAM, TRAIN_STREAM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DqnConfig {
    pub lr: f64,
    pub gamma: f64,
    /// Capacity in agent-episodes.
    pub replay_capacity: usize,
    /// Sequences per gradient update.
    pub batch_size: usize,
    pub updates_per_iteration: usize,
    pub target_sync_every: u64,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Iterations over which epsilon decays linearly.
    pub eps_decay_iterations: usize,
    pub max_grad_norm: Option<f64>,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            gamma: 0.99,
            replay_capacity: 10_000,
            batch_size: 4,
            updates_per_iteration: 1,
            target_sync_every: 100,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_decay_iterations: 500,
            max_grad_norm: Some(0.5),
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config("DQN learning rate and discount must be valid".into()));
        }
        if self.replay_capacity == 0 || self.batch_size == 0 || self.target_sync_every == 0 {
            return Err(Error::Config(
                "DQN buffer, batch and sync period must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.eps_start) || !(0.0..=1.0).contains(&self.eps_end) {
            return Err(Error::Config("exploration rates must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// One agent's episode as stored in replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    pub inputs: Vec<[f64; 2]>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DqnLog {
    pub iteration: usize,
    pub epsilon: f64,
    pub loss: Option<f64>,
    pub mean_raw_reward: f64,
}

/// Epsilon-greedy choice over Q-values.
pub fn epsilon_greedy<R: Rng + ?Sized>(q_values: &[f64], epsilon: f64, rng: &mut R) -> usize {
    if rng.random::<f64>() < epsilon {
        rng.random_range(0..q_values.len())
    } else {
        argmax(q_values)
    }
}

pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |best, (i, &v)| if v > best.1 { (i, v) } else { best },
        )
        .0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DqnAgentShared {
    pub env: EnvConfig,
    pub config: DqnConfig,
    pub q: RecurrentNet,
    pub target: RecurrentNet,
    pub optimizer: AdamState,
    pub replay: VecDeque<Sequence>,
    pub normalizer: RewardNormalizer,
    pub rng: ChaCha8Rng,
    pub updates: u64,
    pub iteration: usize,
}

impl DqnAgentShared {
    pub fn new(env: EnvConfig, config: DqnConfig, hidden: usize, seed: u64) -> Result<Self> {
        env.validate()?;
        config.validate()?;
        let mut init = stream_rng(seed, INIT_STREAM);
        let q = RecurrentNet::init(hidden, env.num_channels + 1, &mut init);
        Ok(Self {
            target: q.clone(),
            optimizer: AdamState::new(&q),
            q,
            env,
            config,
            replay: VecDeque::new(),
            normalizer: RewardNormalizer::new(),
            rng: stream_rng(seed, TRAIN_STREAM),
            updates: 0,
            iteration: 0,
        })
    }

    /// Exploration rate for the next iteration.
    pub fn epsilon(&self) -> f64 {
        let c = &self.config;
        if c.eps_decay_iterations == 0 {
            return c.eps_end;
        }
        let frac = (self.iteration as f64 / c.eps_decay_iterations as f64).min(1.0);
        c.eps_start + (c.eps_end - c.eps_start) * frac
    }

    pub fn sync_target(&mut self) {
        self.target.clone_from(&self.q);
    }

    /// Plays one epsilon-greedy episode and stores every agent's sequence.
    fn collect(&mut self) -> Result<f64> {
        let eps = self.epsilon();
        let n = self.env.num_agents;
        let mut state = EnvState::reset(&self.env, &mut self.rng)?;
        let mut hidden = vec![HiddenState::zeros(self.q.hidden()); n];
        let mut seqs = vec![
            Sequence {
                inputs: Vec::new(),
                actions: Vec::new(),
                rewards: Vec::new(),
            };
            n
        ];
        let mut total = 0.0;
        while !state.is_done() {
            let inputs = state.inputs();
            let mut actions = Vec::with_capacity(n);
            for agent in 0..n {
                let (qv, next) = self.q.forward(&inputs[agent], &hidden[agent])?;
                hidden[agent] = next;
                let a = epsilon_greedy(&qv, eps, &mut self.rng);
                seqs[agent].inputs.push(inputs[agent]);
                seqs[agent].actions.push(a);
                actions.push(Action(a));
            }
            let result = state.step(&actions)?;
            total += result.reward;
            self.normalizer.update(result.reward);
            let r = self.normalizer.normalize(result.reward);
            for s in &mut seqs {
                s.rewards.push(r);
            }
        }
        for s in seqs {
            if self.replay.len() == self.config.replay_capacity {
                self.replay.pop_front();
            }
            self.replay.push_back(s);
        }
        Ok(total)
    }

    /// Gradient of the mean squared TD error over `batch`.
    pub fn td_gradient(&self, batch: &[&Sequence]) -> Result<(RecurrentNet, f64)> {
        let total: usize = batch.iter().map(|s| s.actions.len()).sum();
        let scale = 1.0 / total.max(1) as f64;
        let mut grad = self.q.zeros_like();
        let mut loss = 0.0;
        let h0 = HiddenState::zeros(self.q.hidden());
        for seq in batch {
            let online = self.q.unroll(&seq.inputs, &h0)?;
            let target = self.target.unroll(&seq.inputs, &h0)?;
            let len = seq.actions.len();
            let mut d_out = Vec::with_capacity(len);
            for t in 0..len {
                let bootstrap = if t + 1 < len {
                    target.outputs[t + 1].iter().copied().fold(f64::NEG_INFINITY, f64::max)
                } else {
                    0.0
                };
                let y = seq.rewards[t] + self.config.gamma * bootstrap;
                let a = seq.actions[t];
                let err = online.outputs[t][a] - y;
                loss += err * err * scale;
                let mut d = vec![0.0; self.q.outputs()];
                d[a] = 2.0 * err * scale;
                d_out.push(d);
            }
            grad.add_scaled(&self.q.backward(&online, &d_out)?, 1.0);
        }
        Ok((grad, loss))
    }

    fn update(&mut self) -> Result<Option<f64>> {
        if self.replay.len() < self.config.batch_size {
            return Ok(None);
        }
        let idx: Vec<usize> = (0..self.config.batch_size)
            .map(|_| self.rng.random_range(0..self.replay.len()))
            .collect();
        let batch: Vec<&Sequence> = idx.iter().map(|&i| &self.replay[i]).collect();
        let (mut grad, loss) = self.td_gradient(&batch)?;
        if let Some(m) = self.config.max_grad_norm {
            grad.clip_global_norm(m);
        }
        self.optimizer.step(&mut self.q, &grad, self.config.lr)?;
        self.updates += 1;
        if self.updates.is_multiple_of(self.config.target_sync_every) {
            self.sync_target();
        }
        Ok(Some(loss))
    }

    pub fn train_iteration(&mut self) -> Result<DqnLog> {
        let epsilon = self.epsilon();
        let mean_raw_reward = self.collect()?;
        let mut loss = None;
        for _ in 0..self.config.updates_per_iteration {
            loss = self.update()?.or(loss);
        }
        self.iteration += 1;
        Ok(DqnLog {
            iteration: self.iteration,
            epsilon,
            loss,
            mean_raw_reward,
        })
    }
}

/// Greedy execution of a shared Q-network: every agent runs an identical clone.
pub struct GreedyShared<'a> {
    net: &'a RecurrentNet,
    hidden: Vec<HiddenState>,
    epsilon: f64,
}

impl<'a> GreedyShared<'a> {
    pub fn new(net: &'a RecurrentNet, num_agents: usize, epsilon: f64) -> Self {
        Self {
            net,
            hidden: vec![HiddenState::zeros(net.hidden()); num_agents],
            epsilon,
        }
    }
}

impl Policy for GreedyShared<'_> {
    fn begin_episode(&mut self) {
        let h = HiddenState::zeros(self.net.hidden());
        self.hidden.iter_mut().for_each(|x| x.clone_from(&h));
    }

    fn act(&mut self, inputs: &[[f64; 2]], rng: &mut dyn rand::RngCore) -> Result<Vec<Action>> {
        let mut actions = Vec::with_capacity(inputs.len());
        for (h, y) in self.hidden.iter_mut().zip(inputs) {
            let (qv, next) = self.net.forward(y, h)?;
            *h = next;
            actions.push(Action(epsilon_greedy(&qv, self.epsilon, rng)));
        }
        Ok(actions)
    }
}
