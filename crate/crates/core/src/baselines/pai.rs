//! Pruning at initialization with parameter sharing: one shared actor
//! network, each agent restricted to its own fixed random subset of weights.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::nn::{CriticParams, RecurrentNet, WeightMask};
use crate::ppo::{stream_rng, ActorCriticTrainer, ActorSet, GaeConfig, PpoConfig, INIT_STREAM};
use crate::pruning::prune_count;

pub const DEFAULT_PAI_SPARSITY: f64 = 0.5;
/// RNG stream used to draw PaI masks.
pub const MASK_STREAM: u64 = 2;

/// Random mask removing exactly `floor(sparsity * size)` coordinates of every
/// weight matrix, chosen uniformly.
pub fn random_mask<R: Rng + ?Sized>(net: &RecurrentNet, sparsity: f64, rng: &mut R) -> WeightMask {
    let mut mask = WeightMask::ones(net);
    for tensor in &mut mask.tensors {
        let mut order: Vec<usize> = (0..tensor.len()).collect();
        order.shuffle(rng);
        for &j in &order[..prune_count(sparsity, tensor.len())] {
            tensor[j] = false;
        }
    }
    mask
}

/// PPO trainer whose actors share one network under per-agent masks.
pub fn pai_trainer(
    env: EnvConfig,
    ppo: PpoConfig,
    gae: GaeConfig,
    hidden: usize,
    sparsity: f64,
    seed: u64,
) -> Result<ActorCriticTrainer> {
    if !(0.0..1.0).contains(&sparsity) {
        return Err(Error::Config(format!("PaI sparsity {sparsity} outside [0, 1)")));
    }
    let mut init = stream_rng(seed, INIT_STREAM);
    let net = RecurrentNet::init(hidden, env.num_channels + 1, &mut init);
    let critic = CriticParams::init(&mut init, hidden);
    let mut mask_rng = stream_rng(seed, MASK_STREAM);
    let masks = (0..env.num_agents)
        .map(|_| random_mask(&net, sparsity, &mut mask_rng))
        .collect();
    ActorCriticTrainer::with_actors(env, ppo, gae, None, ActorSet::shared(net, masks), critic, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn masks_have_half_density_and_differ() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = RecurrentNet::init(8, 3, &mut rng);
        let a = random_mask(&net, 0.5, &mut rng);
        let b = random_mask(&net, 0.5, &mut rng);
        for (ta, tb) in a.tensors.iter().zip(&b.tensors) {
            let density = ta.iter().filter(|&&m| m).count() as f64 / ta.len() as f64;
            assert!((density - 0.5).abs() <= 1.0 / ta.len() as f64);
            assert!(ta.iter().zip(tb).any(|(x, y)| x != y));
        }
    }

    #[test]
    fn rejects_full_sparsity() {
        assert!(pai_trainer(
            EnvConfig::new(2, 2, 4),
            PpoConfig::default(),
            GaeConfig::default(),
            4,
            1.0,
            0
        )
        .is_err());
    }
}
