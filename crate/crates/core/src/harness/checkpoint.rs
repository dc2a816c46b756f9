use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::learner::Learner;
use super::records::{EvalRecord, TrainRecord};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"DSACKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to continue a seed's run bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub learner: Learner,
    pub evals: Vec<EvalRecord>,
    pub train_log: Vec<TrainRecord>,
    /// Wall-clock time already spent on this seed.
    pub elapsed_ms: f64,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = CHECKPOINT_MAGIC.to_vec();
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        bincode::serialize_into(&mut out, self).map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || bytes[..8] != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("four bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "checkpoint format version {version}, expected {CHECKPOINT_VERSION}"
            )));
        }
        let ck: Self =
            bincode::deserialize(&bytes[12..]).map_err(|e| Error::Checkpoint(format!("corrupt checkpoint: {e}")))?;
        ck.check_consistent()?;
        Ok(ck)
    }

    fn check_consistent(&self) -> Result<()> {
        let (n, k) = (self.config.num_agents, self.config.num_channels);
        if self.learner.num_agents().is_some_and(|m| m != n) || self.learner.num_channels().is_some_and(|m| m != k) {
            return Err(Error::Checkpoint("learner shape disagrees with stored config".into()));
        }
        Ok(())
    }

    /// Writes atomically through a temporary sibling file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let tmp = path.with_extension("bin.tmp");
        std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Loads a checkpoint and checks that it can continue a run of `config`.
    pub fn load_for(path: &Path, config: &ExperimentConfig) -> Result<Self> {
        let ck = Self::load(path)?;
        ck.check_compatible(config)?;
        Ok(ck)
    }

    pub fn check_compatible(&self, config: &ExperimentConfig) -> Result<()> {
        let stored = &self.config;
        if stored.num_agents != config.num_agents || stored.num_channels != config.num_channels {
            return Err(Error::Checkpoint(format!(
                "checkpoint has N={}, K={} but config requests N={}, K={}",
                stored.num_agents, stored.num_channels, config.num_agents, config.num_channels
            )));
        }
        let mut a = stored.clone();
        let mut b = config.clone();
        for c in [&mut a, &mut b] {
            c.seeds.clear();
            c.name = None;
            c.checkpoint_every = 0;
        }
        if a != b {
            return Err(Error::Checkpoint(
                "checkpoint was written by a different experiment configuration".into(),
            ));
        }
        if self.learner.iteration() > config.iterations {
            return Err(Error::Checkpoint(format!(
                "checkpoint is at iteration {} beyond the configured {}",
                self.learner.iteration(),
                config.iterations
            )));
        }
        Ok(())
    }
}
