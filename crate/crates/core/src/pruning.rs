//! Gradual magnitude pruning of actor networks.
//!
//! Three schedules map a training iteration `i` to a target sparsity:
//!
//! * linear: `p_final * (i - i_start) / (i_P - i_start)`
//! * polynomial: `p_final * (1 - (1 - (i - i_start) / (i_P - i_start))^3)`
//! * harmonic annealing: `min(max(b_i + c_i, p_0), p_final)` where `b_i`
//!   cosine-anneals from `p_0` to `p_final` and
//!   `c_i = 0.1 * sin(2 pi i / 200)` periodically lowers the target so pruned
//!   weights can grow back.
//!
//! Pruning zeroes the smallest-magnitude weights of every weight matrix
//! independently; biases are never pruned. Masks are recomputed from scratch
//! at each prune event, so weights that regrew since the last event compete
//! on magnitude again.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{ActorParams, RecurrentNet, IS_WEIGHT};

pub const HARMONIC_AMPLITUDE: f64 = 0.1;
pub const HARMONIC_PERIOD: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Linear,
    Polynomial,
    Harmonic,
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "polynomial" | "poly" => Ok(Self::Polynomial),
            "harmonic" => Ok(Self::Harmonic),
            other => Err(Error::Config(format!("unknown scheduler '{other}'"))),
        }
    }
}

impl std::fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Linear => "linear",
            Self::Polynomial => "polynomial",
            Self::Harmonic => "harmonic",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsitySchedule {
    pub kind: ScheduleKind,
    pub p_initial: f64,
    pub p_final: f64,
    /// First iteration at which pruning applies.
    pub start: usize,
    /// Iteration at which the schedule reaches `p_final`.
    pub end: usize,
    pub amplitude: f64,
    pub period: usize,
}

impl SparsitySchedule {
    pub fn new(kind: ScheduleKind, p_final: f64, start: usize, end: usize) -> Self {
        Self {
            kind,
            p_initial: 0.0,
            p_final,
            start,
            end,
            amplitude: HARMONIC_AMPLITUDE,
            period: HARMONIC_PERIOD,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_initial)
            || !(0.0..=1.0).contains(&self.p_final)
            || self.p_initial > self.p_final
        {
            return Err(Error::Config(format!(
                "sparsities must satisfy 0 <= p_0 <= p_final <= 1 (got {} and {})",
                self.p_initial, self.p_final
            )));
        }
        if self.start >= self.end {
            return Err(Error::Config(format!(
                "pruning start {} must precede its end {}",
                self.start, self.end
            )));
        }
        if self.period == 0 {
            return Err(Error::Config("harmonic period must be positive".into()));
        }
        Ok(())
    }

    /// Fraction of the annealing window covered at iteration `i`, in `[0, 1]`.
    fn progress(&self, i: usize) -> f64 {
        if i >= self.end {
            1.0
        } else {
            (i - self.start) as f64 / (self.end - self.start) as f64
        }
    }

    /// Target sparsity `p_i` at training iteration `i`.
    pub fn sparsity_at(&self, i: usize) -> f64 {
        match self.kind {
            ScheduleKind::Linear | ScheduleKind::Polynomial if i < self.start => 0.0,
            ScheduleKind::Linear => self.p_final * self.progress(i),
            ScheduleKind::Polynomial => {
                let rest = 1.0 - self.progress(i);
                self.p_final * (1.0 - rest * rest * rest)
            }
            ScheduleKind::Harmonic if i < self.start => self.p_initial,
            ScheduleKind::Harmonic => {
                let b = self.envelope(i);
                let c = self.oscillation(i);
                (b + c).max(self.p_initial).min(self.p_final)
            }
        }
    }

    /// Cosine-annealed envelope `b_i` of the harmonic schedule.
    pub fn envelope(&self, i: usize) -> f64 {
        let x = if i < self.start { 0.0 } else { self.progress(i) };
        self.p_final + 0.5 * (self.p_initial - self.p_final) * (1.0 + (PI * x).cos())
    }

    /// Oscillation term `c_i`. The phase is reduced modulo the period first so
    /// whole periods give exactly zero.
    pub fn oscillation(&self, i: usize) -> f64 {
        let phase = (i % self.period) as f64 / self.period as f64;
        self.amplitude * (2.0 * PI * phase).sin()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneConfig {
    /// One schedule per agent; targets may differ between agents.
    pub schedules: Vec<SparsitySchedule>,
    pub interval: usize,
}

impl PruneConfig {
    pub fn uniform(schedule: SparsitySchedule, num_agents: usize, interval: usize) -> Self {
        Self {
            schedules: vec![schedule; num_agents],
            interval,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.interval == 0 {
            return Err(Error::Config("prune interval must be at least 1".into()));
        }
        self.schedules.iter().try_for_each(SparsitySchedule::validate)
    }
}

/// Number of weights removed from a tensor of `size` entries at sparsity `p`.
pub fn prune_count(p: f64, size: usize) -> usize {
    // The epsilon absorbs representation error such as 0.29 * 100 = 28.999...
    (((p * size as f64) + 1e-9).floor() as usize).min(size)
}

/// Magnitude-prunes every weight matrix of the actor to sparsity `p`.
///
/// Within each tensor the `floor(p * size)` smallest magnitudes (ties broken
/// by ascending index) are zeroed and masked; everything else is unmasked.
pub fn prune_actor(params: &mut ActorParams, p: f64) {
    let p = p.clamp(0.0, 1.0);
    let weights = params
        .net
        .tensors_mut()
        .into_iter()
        .zip(IS_WEIGHT)
        .filter_map(|(t, w)| w.then_some(t));
    for (tensor, mask) in weights.zip(params.mask.tensors.iter_mut()) {
        let count = prune_count(p, tensor.len());
        mask.fill(true);
        if count == 0 {
            continue;
        }
        let mut order: Vec<usize> = (0..tensor.len()).collect();
        order.sort_by(|&a, &b| tensor[a].abs().total_cmp(&tensor[b].abs()).then(a.cmp(&b)));
        for &j in &order[..count] {
            tensor[j] = 0.0;
            mask[j] = false;
        }
    }
}

/// Fraction of prunable weights that are exactly zero.
pub fn actual_sparsity(net: &RecurrentNet) -> f64 {
    let (zeros, total) = net
        .tensors()
        .iter()
        .zip(IS_WEIGHT)
        .filter(|(_, w)| *w)
        .fold((0usize, 0usize), |(z, n), (t, _)| {
            (z + t.iter().filter(|&&v| v == 0.0).count(), n + t.len())
        });
    zeros as f64 / total as f64
}

pub fn mean_actual_sparsity(actors: &[ActorParams]) -> f64 {
    if actors.is_empty() {
        return 0.0;
    }
    actors.iter().map(|a| actual_sparsity(&a.net)).sum::<f64>() / actors.len() as f64
}

/// Prunes each actor to its scheduled sparsity when `i` is a prune event.
/// Returns whether pruning happened.
pub fn maybe_prune(i: usize, config: &PruneConfig, actors: &mut [ActorParams]) -> Result<bool> {
    if config.schedules.len() != actors.len() {
        return Err(Error::Contract(format!(
            "{} schedules for {} actors",
            config.schedules.len(),
            actors.len()
        )));
    }
    if !i.is_multiple_of(config.interval) {
        return Ok(false);
    }
    let mut pruned = false;
    for (actor, schedule) in actors.iter_mut().zip(&config.schedules) {
        if i >= schedule.start {
            prune_actor(actor, schedule.sparsity_at(i));
            pruned = true;
        }
    }
    Ok(pruned)
}

/// Writes `i, p_i` columns for every named schedule, `i = 0..=iterations`.
pub fn write_schedule_csv<W: Write>(
    writer: W,
    schedules: &[(String, SparsitySchedule)],
    iterations: usize,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["i".to_string()];
    header.extend(schedules.iter().map(|(name, _)| name.clone()));
    w.write_record(&header)?;
    for i in 0..=iterations {
        let mut row = vec![i.to_string()];
        row.extend(schedules.iter().map(|(_, s)| format!("{:.12}", s.sparsity_at(i))));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("schedule", e))?;
    Ok(())
}
