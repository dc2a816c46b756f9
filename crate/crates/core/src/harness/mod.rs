//! Experiment orchestration: configuration, seeded runs with periodic
//! evaluation and checkpoints, and CSV summaries.

mod aggregate;
mod checkpoint;
mod config;
mod learner;
mod records;
mod run;

pub use aggregate::{aggregate, curve, export_schedule_plotdata, AggregateOutput, CurvePoint, RunData, TableRow};
pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{Algorithm, ExperimentConfig, Setup};
pub use learner::{Learner, EVAL_STREAM_BASE};
pub use records::{
    format_sig6, load_eval_csv, read_eval_csv, same_outcomes, write_eval_csv, write_train_csv, EvalRecord, TrainRecord,
};
pub use run::{
    run_experiment, run_seed, seed_dir, ExperimentOutcome, RunOptions, SeedOutcome, CHECKPOINT_FILE, CONFIG_FILE,
    EVALS_FILE, TRAIN_LOG_FILE,
};
