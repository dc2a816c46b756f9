//! Two-layer LSTM with a ReLU-rectified linear head, used for actors,
//! the global critic, and the Q-network baseline.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::lstm::{LayerState, LstmCache, LstmLayer};
use super::matrix::Matrix;
use crate::error::{Error, Result};

pub const DEFAULT_HIDDEN: usize = 128;
pub const INPUT_DIM: usize = 2;

/// Number of parameter tensors in a [`RecurrentNet`].
pub const NUM_TENSORS: usize = 8;
/// Which tensors are weight matrices (prunable); the rest are biases.
pub const IS_WEIGHT: [bool; NUM_TENSORS] = [true, true, false, true, true, false, true, false];
pub const TENSOR_NAMES: [&str; NUM_TENSORS] = [
    "layer1.w_ih",
    "layer1.w_hh",
    "layer1.bias",
    "layer2.w_ih",
    "layer2.w_hh",
    "layer2.bias",
    "head.weight",
    "head.bias",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenState {
    pub layers: [LayerState; 2],
}

impl HiddenState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            layers: [LayerState::zeros(hidden), LayerState::zeros(hidden)],
        }
    }
}

/// Parameters of the recurrent network. The same type doubles as a gradient
/// buffer and as Adam moment storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrentNet {
    pub layer1: LstmLayer,
    pub layer2: LstmLayer,
    pub head: Linear,
}

#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    l1: LstmCache,
    l2: LstmCache,
    /// ReLU of the second layer's hidden output.
    features: Vec<f64>,
}

/// Forward pass over a whole sequence, retained for backpropagation.
#[derive(Debug, Clone)]
pub struct Unroll {
    steps: Vec<StepCache>,
    pub outputs: Vec<Vec<f64>>,
}

impl Unroll {
    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }
}

impl RecurrentNet {
    pub fn zeros(hidden: usize, outputs: usize) -> Self {
        Self {
            layer1: LstmLayer::zeros(INPUT_DIM, hidden),
            layer2: LstmLayer::zeros(hidden, hidden),
            head: Linear {
                weight: Matrix::zeros(outputs, hidden),
                bias: vec![0.0; outputs],
            },
        }
    }

    pub fn init<R: Rng + ?Sized>(hidden: usize, outputs: usize, rng: &mut R) -> Self {
        let layer1 = LstmLayer::init(INPUT_DIM, hidden, rng);
        let layer2 = LstmLayer::init(hidden, hidden, rng);
        let bound = 1.0 / (hidden as f64).sqrt();
        let weight = Matrix::from_fn(outputs, hidden, |_, _| rng.random_range(-bound..bound));
        Self {
            layer1,
            layer2,
            head: Linear {
                weight,
                bias: vec![0.0; outputs],
            },
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.hidden(), self.outputs())
    }

    pub fn hidden(&self) -> usize {
        self.layer1.hidden()
    }

    pub fn outputs(&self) -> usize {
        self.head.bias.len()
    }

    pub fn tensors(&self) -> [&[f64]; NUM_TENSORS] {
        [
            self.layer1.w_ih.as_slice(),
            self.layer1.w_hh.as_slice(),
            &self.layer1.bias,
            self.layer2.w_ih.as_slice(),
            self.layer2.w_hh.as_slice(),
            &self.layer2.bias,
            self.head.weight.as_slice(),
            &self.head.bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; NUM_TENSORS] {
        [
            self.layer1.w_ih.as_mut_slice(),
            self.layer1.w_hh.as_mut_slice(),
            &mut self.layer1.bias,
            self.layer2.w_ih.as_mut_slice(),
            self.layer2.w_hh.as_mut_slice(),
            &mut self.layer2.bias,
            self.head.weight.as_mut_slice(),
            &mut self.head.bias,
        ]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.tensors()
            .iter()
            .zip(other.tensors())
            .all(|(a, b)| a.len() == b.len())
            && self.hidden() == other.hidden()
            && self.outputs() == other.outputs()
    }

    pub fn fill(&mut self, value: f64) {
        for t in self.tensors_mut() {
            t.fill(value);
        }
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &Self, scale: f64) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            super::matrix::axpy(scale, b, a);
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales so the global L2 norm is at most `max_norm`; returns the norm before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            let s = max_norm / norm;
            for t in self.tensors_mut() {
                t.iter_mut().for_each(|v| *v *= s);
            }
        }
        norm
    }

    /// SHA-256 over every parameter's bit pattern, as lowercase hex.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for t in self.tensors() {
            for v in t {
                hasher.update(v.to_bits().to_le_bytes());
            }
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    fn step_cached(&self, y: &[f64], hidden: &HiddenState) -> (Vec<f64>, HiddenState, StepCache) {
        let (s1, l1) = self.layer1.forward(y, &hidden.layers[0]);
        let (s2, l2) = self.layer2.forward(&s1.h, &hidden.layers[1]);
        let features: Vec<f64> = s2.h.iter().map(|&v| v.max(0.0)).collect();
        let mut out = self.head.bias.clone();
        self.head.weight.matvec_add(&features, &mut out);
        (out, HiddenState { layers: [s1, s2] }, StepCache { l1, l2, features })
    }

    /// Raw head outputs (logits or value) for one step.
    pub fn forward(&self, y: &[f64; 2], hidden: &HiddenState) -> Result<(Vec<f64>, HiddenState)> {
        let (out, next, _) = self.step_cached(y, hidden);
        if !out.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical("network output"));
        }
        Ok((out, next))
    }

    pub fn unroll(&self, inputs: &[[f64; 2]], h0: &HiddenState) -> Result<Unroll> {
        let mut hidden = h0.clone();
        let mut steps = Vec::with_capacity(inputs.len());
        let mut outputs = Vec::with_capacity(inputs.len());
        for y in inputs {
            let (out, next, cache) = self.step_cached(y, &hidden);
            if !out.iter().all(|v| v.is_finite()) {
                return Err(Error::Numerical("network output"));
            }
            outputs.push(out);
            steps.push(cache);
            hidden = next;
        }
        Ok(Unroll { steps, outputs })
    }

    /// Backpropagation through time over an [`Unroll`]. `d_outputs[t]` is the
    /// loss gradient w.r.t. the head output at step `t`.
    pub fn backward(&self, unroll: &Unroll, d_outputs: &[Vec<f64>]) -> Result<RecurrentNet> {
        if d_outputs.len() != unroll.len() {
            return Err(Error::Contract(format!(
                "{} output gradients for a {}-step unroll",
                d_outputs.len(),
                unroll.len()
            )));
        }
        let hd = self.hidden();
        let mut grad = self.zeros_like();
        let mut dh2_next = vec![0.0; hd];
        let mut dc2_next = vec![0.0; hd];
        let mut dh1_next = vec![0.0; hd];
        let mut dc1_next = vec![0.0; hd];

        for (step, dout) in unroll.steps.iter().zip(d_outputs).rev() {
            if dout.len() != self.outputs() {
                return Err(Error::Shape(format!(
                    "output gradient of length {}, expected {}",
                    dout.len(),
                    self.outputs()
                )));
            }
            grad.head.weight.add_outer(dout, &step.features);
            for (b, d) in grad.head.bias.iter_mut().zip(dout) {
                *b += d;
            }
            let mut dfeat = vec![0.0; hd];
            self.head.weight.matvec_t_add(dout, &mut dfeat);
            let mut dh2 = dh2_next;
            for ((d, &f), &df) in dh2.iter_mut().zip(&step.features).zip(&dfeat) {
                if f > 0.0 {
                    *d += df;
                }
            }
            let (dx2, dh2_prev, dc2_prev) = self.layer2.backward(&step.l2, &dh2, &dc2_next, &mut grad.layer2);

            let mut dh1 = dh1_next;
            super::matrix::axpy(1.0, &dx2, &mut dh1);
            let (_, dh1_prev, dc1_prev) = self.layer1.backward(&step.l1, &dh1, &dc1_next, &mut grad.layer1);

            dh2_next = dh2_prev;
            dc2_next = dc2_prev;
            dh1_next = dh1_prev;
            dc1_next = dc1_prev;
        }
        if !grad.is_finite() {
            return Err(Error::Numerical("gradient"));
        }
        Ok(grad)
    }

    /// Gradients of `sum_t <d_outputs[t], out_t>` for the sequence `inputs`.
    pub fn backward_through_time(
        &self,
        inputs: &[[f64; 2]],
        d_outputs: &[Vec<f64>],
        h0: &HiddenState,
    ) -> Result<RecurrentNet> {
        if inputs.len() != d_outputs.len() {
            return Err(Error::Contract(format!(
                "{} inputs but {} output gradients",
                inputs.len(),
                d_outputs.len()
            )));
        }
        let unroll = self.unroll(inputs, h0)?;
        self.backward(&unroll, d_outputs)
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&l| l - lse).collect()
}

/// Draws an index from a probability vector.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Binary keep-mask over the prunable weight matrices of a network
/// (`true` = active). Biases are never masked.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WeightMask {
    pub tensors: Vec<Vec<bool>>,
}

impl WeightMask {
    pub fn ones(net: &RecurrentNet) -> Self {
        Self {
            tensors: net
                .tensors()
                .iter()
                .zip(IS_WEIGHT)
                .filter(|(_, w)| *w)
                .map(|(t, _)| vec![true; t.len()])
                .collect(),
        }
    }

    pub fn density(&self) -> f64 {
        let total: usize = self.tensors.iter().map(Vec::len).sum();
        let active: usize = self.tensors.iter().flatten().filter(|&&b| b).count();
        active as f64 / total as f64
    }

    /// Zeroes masked coordinates of the weight tensors of `net`.
    pub fn apply(&self, net: &mut RecurrentNet) {
        let weights = net
            .tensors_mut()
            .into_iter()
            .zip(IS_WEIGHT)
            .filter_map(|(t, w)| w.then_some(t));
        for (t, m) in weights.zip(&self.tensors) {
            for (v, &keep) in t.iter_mut().zip(m) {
                if !keep {
                    *v = 0.0;
                }
            }
        }
    }
}

/// Independent actor: recurrent policy over `K + 1` actions plus its prune mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorParams {
    pub net: RecurrentNet,
    pub mask: WeightMask,
}

impl ActorParams {
    pub fn init<R: Rng + ?Sized>(rng: &mut R, num_channels: usize, hidden: usize) -> Self {
        let net = RecurrentNet::init(hidden, num_channels + 1, rng);
        let mask = WeightMask::ones(&net);
        Self { net, mask }
    }

    pub fn from_net(net: RecurrentNet) -> Self {
        let mask = WeightMask::ones(&net);
        Self { net, mask }
    }

    pub fn num_actions(&self) -> usize {
        self.net.outputs()
    }

    /// Action distribution for input `y` and the next hidden state.
    pub fn forward(&self, y: &[f64; 2], hidden: &HiddenState) -> Result<(Vec<f64>, HiddenState)> {
        let (logits, next) = self.net.forward(y, hidden)?;
        Ok((softmax(&logits), next))
    }
}

/// Global critic: recurrent state-value estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticParams {
    pub net: RecurrentNet,
}

impl CriticParams {
    pub fn init<R: Rng + ?Sized>(rng: &mut R, hidden: usize) -> Self {
        Self {
            net: RecurrentNet::init(hidden, 1, rng),
        }
    }

    pub fn forward(&self, y: &[f64; 2], hidden: &HiddenState) -> Result<(f64, HiddenState)> {
        let (out, next) = self.net.forward(y, hidden)?;
        Ok((out[0], next))
    }
}
