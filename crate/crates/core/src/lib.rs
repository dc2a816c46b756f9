pub mod baselines;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod policy;
pub mod ppo;
pub mod pruning;

pub use error::{Error, Result};
