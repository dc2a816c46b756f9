use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One evaluation pause: mean episodic reward over the eval episodes and the
/// mean actual sparsity of the actor networks at that point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub seed: u64,
    pub iteration: usize,
    pub mean_reward: f64,
    pub sparsity: f64,
    pub wall_ms: f64,
}

impl EvalRecord {
    /// Equality of everything except wall-clock time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        self.seed == other.seed
            && self.iteration == other.iteration
            && self.mean_reward.to_bits() == other.mean_reward.to_bits()
            && self.sparsity.to_bits() == other.sparsity.to_bits()
    }
}

pub fn same_outcomes(a: &[EvalRecord], b: &[EvalRecord]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same_outcome(y))
}

/// Per-iteration training summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub iteration: usize,
    pub train_reward: f64,
    pub sparsity: f64,
    /// Mean critic loss (actor-critic) or TD loss (DQN); NaN when no update ran.
    pub loss: f64,
    pub pruned: bool,
}

/// Decimal rendering with six significant digits.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-6..15).contains(&magnitude) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // Rounding can carry into a new leading digit (e.g. 9.999995 -> 10.00000).
    let digits = s
        .chars()
        .filter(|c| c.is_ascii_digit())
        .skip_while(|&c| c == '0')
        .count();
    if digits > 6 && decimals > 0 {
        let d = decimals - 1;
        format!("{x:.d$}")
    } else {
        s
    }
}

pub const EVAL_HEADER: [&str; 5] = ["seed", "iteration", "mean_reward", "sparsity", "wall_ms"];

pub fn write_eval_csv<W: Write>(writer: W, records: &[EvalRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(EVAL_HEADER)?;
    for r in records {
        w.write_record([
            r.seed.to_string(),
            r.iteration.to_string(),
            format_sig6(r.mean_reward),
            format_sig6(r.sparsity),
            format_sig6(r.wall_ms),
        ])?;
    }
    w.flush().map_err(|e| Error::io("eval csv", e))?;
    Ok(())
}

pub fn read_eval_csv<R: Read>(reader: R) -> Result<Vec<EvalRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != EVAL_HEADER {
        return Err(Error::Config(format!("unexpected eval header {header:?}")));
    }
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

pub fn load_eval_csv(path: &Path) -> Result<Vec<EvalRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_eval_csv(file)
}

pub fn write_train_csv<W: Write>(writer: W, records: &[TrainRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["iteration", "train_reward", "sparsity", "loss", "pruned"])?;
    for r in records {
        w.write_record([
            r.iteration.to_string(),
            format_sig6(r.train_reward),
            format_sig6(r.sparsity),
            format_sig6(r.loss),
            u8::from(r.pruned).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("train csv", e))?;
    Ok(())
}
