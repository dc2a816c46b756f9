use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use dsa_core::harness::{
    aggregate, export_schedule_plotdata, run_experiment, Checkpoint, ExperimentConfig, RunOptions,
};

/// Sparse multi-agent actor-critic experiments for dynamic spectrum access.
#[derive(Parser)]
#[command(name = "dsa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of an experiment and record evaluation curves.
    Train(TrainArgs),
    /// Evaluate a saved checkpoint.
    Eval(EvalArgs),
    /// Summarize finished runs into curves.csv and table.csv.
    Aggregate(AggregateArgs),
    /// Export the sparsity of all three schedulers per iteration.
    Schedule(ScheduleArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML experiment file; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set num_agents=4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> dsa_core::Result<ExperimentConfig> {
        let base = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        base.with_overrides(&self.overrides)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output root; runs land in `<out>/<run name>/seed_<s>`.
    #[arg(long, env = "DSA_OUTPUT_ROOT", default_value = "runs")]
    out: PathBuf,
    /// Continue seeds from their existing checkpoints.
    #[arg(long)]
    resume: bool,
    /// Checkpoint and stop once this many iterations are complete.
    #[arg(long)]
    stop_after: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Number of evaluation episodes; defaults to the run's setting.
    #[arg(long)]
    episodes: Option<usize>,
}

#[derive(Args)]
struct AggregateArgs {
    /// Run directories (each containing config.toml and seed_* folders).
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    #[arg(long, env = "DSA_OUTPUT_ROOT", default_value = "runs")]
    out: PathBuf,
}

#[derive(Args)]
struct ScheduleArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Destination CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn train(args: TrainArgs) -> anyhow::Result<()> {
    let config = args.config.load()?;
    let run_dir = args.out.join(config.run_name());
    println!(
        "config: {}",
        args.config
            .config
            .as_deref()
            .map_or("<defaults>".into(), |p| p.display().to_string())
    );
    println!("output: {}", run_dir.display());
    let options = RunOptions {
        resume: args.resume,
        stop_after: args.stop_after,
    };
    let outcome = run_experiment(&config, &args.out, &options)?;
    for seed in &outcome.seeds {
        let last = seed.evals.last();
        println!(
            "seed {}: {} ({}), final reward {}",
            seed.seed,
            if seed.completed { "completed" } else { "stopped" },
            seed.dir.display(),
            last.map_or("n/a".into(), |r| format!(
                "{:.3} at iteration {}",
                r.mean_reward, r.iteration
            ))
        );
    }
    Ok(())
}

fn eval(args: EvalArgs) -> anyhow::Result<()> {
    println!("checkpoint: {}", args.checkpoint.display());
    let ck = Checkpoint::load(&args.checkpoint)?;
    let episodes = args.episodes.unwrap_or(ck.config.eval_episodes);
    anyhow::ensure!(episodes > 0, "episodes must be positive");
    let reward = ck.learner.evaluate_at_current(&ck.config, episodes, ck.seed)?;
    println!(
        "{} seed {} iteration {}: mean reward {reward:.6} over {episodes} episodes, sparsity {:.6}",
        ck.config.run_name(),
        ck.seed,
        ck.learner.iteration(),
        ck.learner.sparsity()
    );
    Ok(())
}

fn aggregate_cmd(args: AggregateArgs) -> anyhow::Result<()> {
    for r in &args.runs {
        println!("run: {}", r.display());
    }
    println!("output: {}", args.out.display());
    let out = aggregate(&args.runs, &args.out)?;
    println!("wrote {}", out.curves_csv.display());
    println!("wrote {}", out.table_csv.display());
    for row in &out.rows {
        println!(
            "{} ({:?}): best seed {} reward {:.2}, mean {:.2} +- {:.2}",
            row.method, row.setup, row.best_seed, row.best_reward, row.mean_reward, row.std_reward
        );
    }
    Ok(())
}

fn schedule(args: ScheduleArgs) -> anyhow::Result<()> {
    let config = args.config.load()?;
    match &args.out {
        Some(path) => {
            println!("output: {}", path.display());
            create_parent(path)?;
            let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            export_schedule_plotdata(&config, file)?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            export_schedule_plotdata(&config, &mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn create_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Aggregate(a) => aggregate_cmd(a),
        Command::Schedule(a) => schedule(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<dsa_core::Error>() {
                Some(dsa_core::Error::Config(_)) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
