use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::config::{ExperimentConfig, Setup};
use super::records::{format_sig6, load_eval_csv, EvalRecord};
use super::run::{seed_dir, CONFIG_FILE, EVALS_FILE};
use crate::error::{Error, Result};
use crate::pruning::{write_schedule_csv, ScheduleKind};

/// Cross-seed statistics at one evaluation iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub iteration: usize,
    pub mean: f64,
    /// Population standard deviation across seeds.
    pub std: f64,
    pub seeds: usize,
    pub mean_sparsity: f64,
}

pub fn curve(records: &[EvalRecord]) -> Vec<CurvePoint> {
    let mut by_iter: BTreeMap<usize, Vec<&EvalRecord>> = BTreeMap::new();
    for r in records {
        by_iter.entry(r.iteration).or_default().push(r);
    }
    by_iter
        .into_iter()
        .map(|(iteration, rs)| {
            let n = rs.len() as f64;
            let mean = rs.iter().map(|r| r.mean_reward).sum::<f64>() / n;
            let var = rs.iter().map(|r| (r.mean_reward - mean).powi(2)).sum::<f64>() / n;
            CurvePoint {
                iteration,
                mean,
                std: var.sqrt(),
                seeds: rs.len(),
                mean_sparsity: rs.iter().map(|r| r.sparsity).sum::<f64>() / n,
            }
        })
        .collect()
}

/// Final-iteration results of one method.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub method: String,
    pub setup: Setup,
    pub best_seed: u64,
    pub best_reward: f64,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub final_sparsity: f64,
}

/// A completed run directory loaded back from disk.
#[derive(Debug, Clone)]
pub struct RunData {
    pub dir: PathBuf,
    pub config: ExperimentConfig,
    pub records: Vec<EvalRecord>,
}

impl RunData {
    pub fn load(dir: &Path) -> Result<Self> {
        let config = ExperimentConfig::load(dir.join(CONFIG_FILE))?;
        let mut records = Vec::new();
        for &seed in &config.seeds {
            let path = seed_dir(dir, seed).join(EVALS_FILE);
            if !path.exists() {
                return Err(Error::State(format!("missing {}", path.display())));
            }
            records.extend(load_eval_csv(&path)?);
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            config,
            records,
        })
    }

    pub fn method(&self) -> String {
        self.config.run_name()
    }

    pub fn table_row(&self) -> Result<TableRow> {
        let last = self
            .records
            .iter()
            .map(|r| r.iteration)
            .max()
            .ok_or_else(|| Error::State(format!("{} has no eval records", self.dir.display())))?;
        let finals: Vec<&EvalRecord> = self.records.iter().filter(|r| r.iteration == last).collect();
        let best = finals
            .iter()
            .copied()
            .fold(finals[0], |b, r| if r.mean_reward > b.mean_reward { r } else { b });
        let point = &curve(&finals.iter().map(|r| (*r).clone()).collect::<Vec<_>>())[0];
        Ok(TableRow {
            method: self.method(),
            setup: self.config.setup,
            best_seed: best.seed,
            best_reward: best.mean_reward,
            mean_reward: point.mean,
            std_reward: point.std,
            final_sparsity: point.mean_sparsity,
        })
    }
}

/// Runs are comparable when they share the scenario and evaluation protocol.
fn check_compatible(runs: &[RunData]) -> Result<()> {
    let key = |c: &ExperimentConfig| {
        (
            c.num_agents,
            c.num_channels,
            c.horizon,
            c.iterations,
            c.eval_every,
            c.eval_episodes,
        )
    };
    let first = key(&runs[0].config);
    for r in &runs[1..] {
        if key(&r.config) != first {
            return Err(Error::Config(format!(
                "{} and {} use incompatible scenarios or evaluation protocols",
                runs[0].dir.display(),
                r.dir.display()
            )));
        }
    }
    let mut names: Vec<String> = runs.iter().map(RunData::method).collect();
    names.sort();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("two run directories share a method name".into()));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct AggregateOutput {
    pub curves_csv: PathBuf,
    pub table_csv: PathBuf,
    pub rows: Vec<TableRow>,
}

/// Writes `curves.csv` (per-iteration mean and std across seeds) and
/// `table.csv` (best-seed final reward per method) into `out_dir`.
pub fn aggregate(run_dirs: &[PathBuf], out_dir: &Path) -> Result<AggregateOutput> {
    if run_dirs.is_empty() {
        return Err(Error::Config("no run directories given".into()));
    }
    let runs = run_dirs.iter().map(|d| RunData::load(d)).collect::<Result<Vec<_>>>()?;
    check_compatible(&runs)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let curves_csv = out_dir.join("curves.csv");
    let file = std::fs::File::create(&curves_csv).map_err(|e| Error::io(&curves_csv, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record([
        "method",
        "iteration",
        "mean_reward",
        "std_reward",
        "seeds",
        "mean_sparsity",
    ])?;
    for run in &runs {
        for p in curve(&run.records) {
            w.write_record([
                run.method(),
                p.iteration.to_string(),
                format_sig6(p.mean),
                format_sig6(p.std),
                p.seeds.to_string(),
                format_sig6(p.mean_sparsity),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(&curves_csv, e))?;

    let rows = runs.iter().map(RunData::table_row).collect::<Result<Vec<_>>>()?;
    let table_csv = out_dir.join("table.csv");
    let file = std::fs::File::create(&table_csv).map_err(|e| Error::io(&table_csv, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record([
        "method",
        "setup",
        "best_seed",
        "best_reward",
        "mean_reward",
        "std_reward",
        "final_sparsity",
    ])?;
    for r in &rows {
        w.write_record([
            r.method.clone(),
            format!("{:?}", r.setup),
            r.best_seed.to_string(),
            format_sig6(r.best_reward),
            format_sig6(r.mean_reward),
            format_sig6(r.std_reward),
            format_sig6(r.final_sparsity),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&table_csv, e))?;
    Ok(AggregateOutput {
        curves_csv,
        table_csv,
        rows,
    })
}

/// Sparsity curves of all three schedulers under `config`'s pruning
/// parameters, sampled at every iteration `0..=iterations`.
pub fn export_schedule_plotdata<W: Write>(config: &ExperimentConfig, writer: W) -> Result<()> {
    let schedules: Vec<_> = [ScheduleKind::Linear, ScheduleKind::Polynomial, ScheduleKind::Harmonic]
        .into_iter()
        .map(|kind| {
            let mut c = config.clone();
            c.scheduler = kind;
            let s = c.schedule_for(config.p_final);
            s.validate().map(|_| (kind.to_string(), s))
        })
        .collect::<Result<_>>()?;
    write_schedule_csv(writer, &schedules, config.prune_end.unwrap_or(config.iterations))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(seed: u64, iteration: usize, r: f64) -> EvalRecord {
        EvalRecord {
            seed,
            iteration,
            mean_reward: r,
            sparsity: 0.5,
            wall_ms: 0.0,
        }
    }

    #[test]
    fn mean_and_population_std() {
        let c = curve(&[rec(0, 10, 1.0), rec(1, 10, 3.0), rec(0, 20, 5.0)]);
        assert_eq!(c.len(), 2);
        assert_eq!((c[0].mean, c[0].std, c[0].seeds), (2.0, 1.0, 2));
        assert_eq!((c[1].mean, c[1].std), (5.0, 0.0));
    }

    #[test]
    fn schedule_plotdata_columns() {
        let mut buf = Vec::new();
        export_schedule_plotdata(&ExperimentConfig::default(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "i,linear,polynomial,harmonic");
        assert_eq!(lines.len(), 1002);
        assert!(lines[1001].starts_with("1000,0.950000000000,"));
    }
}
