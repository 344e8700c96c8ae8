//! Age-of-Information accounting and the per-task fractional cost.
//!
//! Between two consecutive completions of a device the age rises linearly
//! from `Y_k` to `Y_k + Z_{k+1} + Y_{k+1}` and then resets to `Y_{k+1}`. The
//! per-task area is `A = ½(Y_k + Z_{k+1} + Y_{k+1})² − ½Y_{k+1}²`, which differs
//! from the area on that interval by `½Y_k² − ½Y_{k+1}²`; summed over a trace
//! these differences telescope, so
//! `∫₀ᵀ Δ = ½c₁² − ½Y₁² + Σ A + ½Y_K² + Y_K (T − c_K) + ½(T − c_K)²`
//! where `c₁`, `c_K` are the first and last completion times.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{EpisodeLog, Outcome, TaskRecord};

#[derive(Debug, Error, PartialEq)]
pub enum AoiError {
    #[error("{name} = {value} must be >= 0")]
    Negative { name: &'static str, value: f64 },
    #[error("ratio cost needs y + z > 0")]
    ZeroDenominator,
    #[error("device {0} has no logged tasks")]
    EmptyTrace(usize),
    #[error("horizon must be positive")]
    EmptyHorizon,
}

/// Per-task age area `½(Y_k + Z_{k+1} + Y_{k+1})² − ½Y_{k+1}²`.
pub fn trapezoid_area(y_k: f64, z_next: f64, y_next: f64) -> Result<f64, AoiError> {
    for (name, value) in [("y_k", y_k), ("z_next", z_next), ("y_next", y_next)] {
        if !(value >= 0.0) {
            return Err(AoiError::Negative { name, value });
        }
    }
    Ok(area(y_k, z_next, y_next))
}

fn area(y_k: f64, z_next: f64, y_next: f64) -> f64 {
    let top = y_k + z_next + y_next;
    0.5 * top * top - 0.5 * y_next * y_next
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    /// `A − γ (y + z)`.
    #[default]
    Fractional,
    /// `A / (y + z)`, the non-fractional benchmark.
    Ratio,
}

pub fn task_cost(
    y_k: f64,
    z_next: f64,
    y_next: f64,
    gamma: f64,
    mode: CostMode,
) -> Result<f64, AoiError> {
    let a = trapezoid_area(y_k, z_next, y_next)?;
    let span = y_k + z_next;
    match mode {
        CostMode::Fractional => Ok(a - gamma * span),
        CostMode::Ratio if span > 0.0 => Ok(a / span),
        CostMode::Ratio => Err(AoiError::ZeroDenominator),
    }
}

/// How dropped tasks enter the `(Y, Z, Y')` records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DropMode {
    /// The waiting and drop spans of dropped tasks are added to the next
    /// completed task's waiting time, keeping the telescoping identity exact.
    #[default]
    FoldIn,
    /// Only pairs of back-to-back completions produce records.
    Skip,
}

/// One `(Y_k, Z_{k+1}, Y_{k+1})` triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeRecord {
    pub device: usize,
    /// Index of the task whose completion closed the record.
    pub task: u64,
    /// Completion time of that task.
    pub time: f64,
    pub y_prev: f64,
    pub z: f64,
    pub y_next: f64,
    /// Dropped tasks folded into `z`.
    pub drops: u32,
}

impl AgeRecord {
    pub fn area(&self) -> f64 {
        area(self.y_prev, self.z, self.y_next)
    }

    pub fn span(&self) -> f64 {
        self.y_prev + self.z
    }

    pub fn cost(&self, gamma: f64, mode: CostMode) -> Result<f64, AoiError> {
        task_cost(self.y_prev, self.z, self.y_next, gamma, mode)
    }
}

/// Turns one device's resolved tasks, fed in order, into age records.
#[derive(Debug, Clone)]
pub struct RecordBuilder {
    mode: DropMode,
    drop_time: f64,
    last_delay: Option<f64>,
    folded: f64,
    drops: u32,
}

impl RecordBuilder {
    pub fn new(mode: DropMode, drop_time: f64) -> Self {
        Self {
            mode,
            drop_time,
            last_delay: None,
            folded: 0.0,
            drops: 0,
        }
    }

    /// Feeds the next resolved task; returns the record it closes, if any.
    pub fn push(&mut self, task: &TaskRecord) -> Option<AgeRecord> {
        match task.outcome {
            Outcome::InFlight => None,
            Outcome::Dropped { .. } => {
                match self.mode {
                    DropMode::FoldIn => {
                        self.folded += task.wait_before + self.drop_time;
                        self.drops += 1;
                    }
                    DropMode::Skip => self.last_delay = None,
                }
                None
            }
            Outcome::Completed { time, delay } => {
                let record = self.last_delay.map(|y_prev| AgeRecord {
                    device: task.device,
                    task: task.index,
                    time,
                    y_prev,
                    z: self.folded + task.wait_before,
                    y_next: delay,
                    drops: self.drops,
                });
                self.last_delay = Some(delay);
                self.folded = 0.0;
                self.drops = 0;
                record
            }
        }
    }
}

/// All age records of one device.
pub fn age_records(log: &EpisodeLog, device: usize, mode: DropMode) -> Vec<AgeRecord> {
    let mut builder = RecordBuilder::new(mode, log.drop_time);
    log.device_tasks(device)
        .filter_map(|t| builder.push(t))
        .collect()
}

/// `Σ A / Σ (Y_k + Z_{k+1})`; `None` without records.
pub fn ratio_estimate(records: &[AgeRecord]) -> Option<f64> {
    if records.is_empty() {
        return None;
    }
    let (num, den) = records
        .iter()
        .fold((0.0, 0.0), |(n, d), r| (n + r.area(), d + r.span()));
    Some(num / den)
}

/// Exact integral of the device's age over `[from, to]`.
///
/// The age starts at 0 at time 0 and resets to `Y` at each completion; drops
/// do not reset it.
pub fn integrate_age_between(log: &EpisodeLog, device: usize, from: f64, to: f64) -> f64 {
    if to <= from {
        return 0.0;
    }
    // (start of segment, generation time of the freshest completed task)
    let mut basis = 0.0;
    let mut seg_start = 0.0;
    let mut total = 0.0;
    let mut add = |a: f64, b: f64, basis: f64| {
        let (lo, hi) = (a.max(from), b.min(to));
        if hi > lo {
            let (u, v) = (lo - basis, hi - basis);
            total += 0.5 * (v * v - u * u);
        }
    };
    for t in log.device_tasks(device) {
        if let Outcome::Completed { time, .. } = t.outcome {
            add(seg_start, time, basis);
            seg_start = time;
            basis = t.gen_time;
            if seg_start >= to {
                return total;
            }
        }
    }
    add(seg_start, f64::INFINITY, basis);
    total
}

/// Exact age integral over the whole logged horizon `[0, end_time]`.
pub fn integrate_age(log: &EpisodeLog, device: usize) -> f64 {
    integrate_age_between(log, device, 0.0, log.end_time)
}

/// Age integral over `[0, end_time]` rebuilt from fold-in records plus the
/// boundary terms; equals [`integrate_age`] up to rounding.
pub fn telescoped_integral(log: &EpisodeLog, device: usize) -> f64 {
    let mut completions = log.device_tasks(device).filter_map(|t| match t.outcome {
        Outcome::Completed { time, delay } => Some((time, delay)),
        _ => None,
    });
    let end = log.end_time;
    let Some((c1, y1)) = completions.next() else {
        return 0.5 * end * end;
    };
    let (ck, yk) = completions.last().unwrap_or((c1, y1));
    let records: f64 = age_records(log, device, DropMode::FoldIn)
        .iter()
        .map(AgeRecord::area)
        .sum();
    let tail = end - ck;
    0.5 * c1 * c1 - 0.5 * y1 * y1 + records + 0.5 * yk * yk + yk * tail + 0.5 * tail * tail
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoiSummary {
    /// Exact time average over `[0, end_time]`.
    pub time_average: f64,
    /// Trapezoid ratio estimator; `None` with fewer than two completions.
    pub ratio_estimate: Option<f64>,
    pub records: usize,
    pub completed: usize,
    pub dropped: usize,
}

pub fn average_aoi(log: &EpisodeLog, device: usize, mode: DropMode) -> Result<AoiSummary, AoiError> {
    if log.device_tasks(device).next().is_none() {
        return Err(AoiError::EmptyTrace(device));
    }
    if !(log.end_time > 0.0) {
        return Err(AoiError::EmptyHorizon);
    }
    let records = age_records(log, device, mode);
    let (completed, dropped) = log.device_tasks(device).fold((0, 0), |(c, d), t| match t.outcome {
        Outcome::Completed { .. } => (c + 1, d),
        Outcome::Dropped { .. } => (c, d + 1),
        Outcome::InFlight => (c, d),
    });
    Ok(AoiSummary {
        time_average: integrate_age(log, device) / log.end_time,
        ratio_estimate: ratio_estimate(&records),
        records: records.len(),
        completed,
        dropped,
    })
}

/// Running numerator and denominator of one device's episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    pub device: usize,
    pub episode: usize,
    /// Quotient in force during this episode.
    pub gamma: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub records: Vec<AgeRecord>,
    pub drops: u32,
}

impl CostLedger {
    pub fn new(device: usize, episode: usize, gamma: f64) -> Self {
        Self {
            device,
            episode,
            gamma,
            numerator: 0.0,
            denominator: 0.0,
            records: Vec::new(),
            drops: 0,
        }
    }

    pub fn push(&mut self, record: AgeRecord) {
        self.numerator += record.area();
        self.denominator += record.span();
        self.records.push(record);
    }

    /// Starts the next episode's ledger with the updated quotient.
    pub fn next_episode(&self, gamma: f64) -> Self {
        Self::new(self.device, self.episode + 1, gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaUpdate {
    pub gamma: f64,
    /// The episode had no records and the previous quotient was kept.
    pub carried: bool,
}

/// `γ_{i+1} = N_i / D_i` over the episode's records.
pub fn episode_gamma_update(ledger: &CostLedger) -> GammaUpdate {
    match ratio_estimate(&ledger.records) {
        Some(gamma) if ledger.denominator > 0.0 => GammaUpdate {
            gamma,
            carried: false,
        },
        _ => GammaUpdate {
            gamma: ledger.gamma,
            carried: true,
        },
    }
}
