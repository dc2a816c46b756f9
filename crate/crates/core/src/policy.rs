//! Decentralized execution: policies that map each agent's latest
//! action/observation pair to its next action.

use rand::Rng;

use crate::env::{Action, EnvConfig, EnvState, EpisodeTrace};
use crate::error::Result;
use crate::nn::{sample_categorical, softmax, HiddenState, RecurrentNet};

pub trait Policy {
    /// Clears per-episode recurrent state.
    fn begin_episode(&mut self);

    fn act(&mut self, inputs: &[[f64; 2]], rng: &mut dyn rand::RngCore) -> Result<Vec<Action>>;
}

/// One recurrent actor network per agent, actions sampled from its softmax.
pub struct SampledActors<'a> {
    nets: Vec<&'a RecurrentNet>,
    hidden: Vec<HiddenState>,
}

impl<'a> SampledActors<'a> {
    pub fn new(nets: Vec<&'a RecurrentNet>) -> Self {
        let hidden = nets.iter().map(|n| HiddenState::zeros(n.hidden())).collect();
        Self { nets, hidden }
    }
}

impl Policy for SampledActors<'_> {
    fn begin_episode(&mut self) {
        for (h, n) in self.hidden.iter_mut().zip(&self.nets) {
            *h = HiddenState::zeros(n.hidden());
        }
    }

    fn act(&mut self, inputs: &[[f64; 2]], rng: &mut dyn rand::RngCore) -> Result<Vec<Action>> {
        let mut actions = Vec::with_capacity(inputs.len());
        for ((net, h), y) in self.nets.iter().zip(self.hidden.iter_mut()).zip(inputs) {
            let (logits, next) = net.forward(y, h)?;
            *h = next;
            actions.push(Action(sample_categorical(&softmax(&logits), rng)));
        }
        Ok(actions)
    }
}

/// Runs one full episode with fresh world draws from `rng`.
pub fn run_episode<P: Policy + ?Sized, R: Rng>(
    config: &EnvConfig,
    policy: &mut P,
    rng: &mut R,
) -> Result<EpisodeTrace> {
    let mut state = EnvState::reset(config, rng)?;
    policy.begin_episode();
    let mut trace = EpisodeTrace::default();
    while !state.is_done() {
        let actions = policy.act(&state.inputs(), rng)?;
        let result = state.step(&actions)?;
        trace.push(&actions, &result);
    }
    Ok(trace)
}

/// Evaluation metric: `(1/N) sum_t sum_n r_t^n`. Every agent receives the
/// joint throughput, so this equals the episode throughput.
pub fn mean_episodic_reward(trace: &EpisodeTrace) -> f64 {
    let n = trace.num_agents().max(1) as f64;
    trace.slots.iter().map(|s| s.reward * n).sum::<f64>() / n
}
