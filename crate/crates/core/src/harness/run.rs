use std::path::{Path, PathBuf};
use std::time::Instant;

use super::checkpoint::Checkpoint;
use super::config::ExperimentConfig;
use super::learner::Learner;
use super::records::{write_eval_csv, write_train_csv, EvalRecord};
use crate::error::{Error, Result};

pub const CONFIG_FILE: &str = "config.toml";
pub const EVALS_FILE: &str = "evals.csv";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Continue each seed from `<seed dir>/checkpoint.bin` when present.
    pub resume: bool,
    /// Stop (after checkpointing) once this many iterations are complete.
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    pub dir: PathBuf,
    pub evals: Vec<EvalRecord>,
    pub completed: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub dir: PathBuf,
    pub seeds: Vec<SeedOutcome>,
}

pub fn seed_dir(run_dir: &Path, seed: u64) -> PathBuf {
    run_dir.join(format!("seed_{seed}"))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, write: impl FnOnce(&mut std::fs::File) -> Result<()>) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write(&mut file)
}

fn is_eval_point(config: &ExperimentConfig, iteration: usize) -> bool {
    iteration.is_multiple_of(config.eval_every) || iteration == config.iterations
}

fn persist(ck: &Checkpoint, dir: &Path) -> Result<()> {
    ck.save(&dir.join(CHECKPOINT_FILE))?;
    write_file(&dir.join(EVALS_FILE), |f| write_eval_csv(f, &ck.evals))?;
    write_file(&dir.join(TRAIN_LOG_FILE), |f| write_train_csv(f, &ck.train_log))
}

/// Trains and evaluates one seed inside `dir`.
pub fn run_seed(config: &ExperimentConfig, seed: u64, dir: &Path, options: &RunOptions) -> Result<SeedOutcome> {
    create_dir(dir)?;
    let ck_path = dir.join(CHECKPOINT_FILE);
    let mut ck = if options.resume && ck_path.exists() {
        let ck = Checkpoint::load_for(&ck_path, config)?;
        if ck.seed != seed {
            return Err(Error::Checkpoint(format!(
                "checkpoint belongs to seed {}, not {seed}",
                ck.seed
            )));
        }
        log::info!("resuming seed {seed} at iteration {}", ck.learner.iteration());
        ck
    } else {
        Checkpoint {
            config: config.clone(),
            seed,
            learner: Learner::new(config, seed)?,
            evals: Vec::new(),
            train_log: Vec::new(),
            elapsed_ms: 0.0,
        }
    };
    let start = Instant::now();
    let base_ms = ck.elapsed_ms;
    let elapsed = |start: &Instant| base_ms + start.elapsed().as_secs_f64() * 1e3;

    if config.eval_at_start && ck.learner.iteration() == 0 && ck.evals.is_empty() {
        let mean_reward = ck.learner.evaluate_at_current(config, config.eval_episodes, seed)?;
        ck.evals.push(EvalRecord {
            seed,
            iteration: 0,
            mean_reward,
            sparsity: ck.learner.sparsity(),
            wall_ms: elapsed(&start),
        });
    }

    while ck.learner.iteration() < config.iterations {
        if options.stop_after.is_some_and(|s| ck.learner.iteration() >= s) {
            break;
        }
        let record = ck.learner.train_iteration()?;
        ck.train_log.push(record);
        let i = ck.learner.iteration();
        if is_eval_point(config, i) {
            let mean_reward = ck.learner.evaluate_at_current(config, config.eval_episodes, seed)?;
            if !mean_reward.is_finite() {
                return Err(Error::Numerical("evaluation reward"));
            }
            let rec = EvalRecord {
                seed,
                iteration: i,
                mean_reward,
                sparsity: ck.learner.sparsity(),
                wall_ms: elapsed(&start),
            };
            log::info!(
                "seed {seed} iteration {i}: reward {:.3} sparsity {:.4}",
                rec.mean_reward,
                rec.sparsity
            );
            ck.evals.push(rec);
        }
        if config.checkpoint_every > 0 && i % config.checkpoint_every == 0 && i < config.iterations {
            ck.elapsed_ms = elapsed(&start);
            persist(&ck, dir)?;
        }
    }
    ck.elapsed_ms = elapsed(&start);
    persist(&ck, dir)?;
    Ok(SeedOutcome {
        seed,
        dir: dir.to_path_buf(),
        completed: ck.learner.iteration() == config.iterations,
        evals: ck.evals,
    })
}

/// Runs every configured seed under `out_root/<run name>/seed_<s>`.
pub fn run_experiment(config: &ExperimentConfig, out_root: &Path, options: &RunOptions) -> Result<ExperimentOutcome> {
    config.validate()?;
    let dir = out_root.join(config.run_name());
    create_dir(&dir)?;
    let config_path = dir.join(CONFIG_FILE);
    std::fs::write(&config_path, config.to_toml_string()).map_err(|e| Error::io(&config_path, e))?;
    let seeds = config
        .seeds
        .iter()
        .map(|&seed| run_seed(config, seed, &seed_dir(&dir, seed), options))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentOutcome { dir, seeds })
}
