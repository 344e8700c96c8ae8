//! Experiment specs, seeded runs, parameter sweeps and convergence reports.

use std::io;
use std::path::Path;
use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aoi::{CostMode, DropMode};
use crate::baselines::{ActionSpace, BaselineError, BaselineKind, BaselinePolicy};
use crate::bridge::{serve_connect, BridgeError, EpisodeStat, Session, SessionPlan};
use crate::fql::{FqlTrace, RATE_EXCLUSION};
use crate::sim::{SchedulingPolicy, SimConfig, SimError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl HarnessError {
    /// Whether the error stems from the user's input rather than the run.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            HarnessError::Config(_)
                | HarnessError::Baseline(_)
                | HarnessError::Sim(SimError::Config { .. })
                | HarnessError::Bridge(BridgeError::Config(_) | BridgeError::Sim(SimError::Config { .. }))
        )
    }
}

/// Who answers a device's decisions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicySpec {
    Baseline(BaselineKind),
    /// A remote client reached through the experiment's `bridge` endpoint.
    Bridge,
}

impl PolicySpec {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        if text.trim() == "bridge" {
            Ok(PolicySpec::Bridge)
        } else {
            Ok(PolicySpec::Baseline(BaselineKind::parse(text)?))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    EdgeCapacity,
    DropCoefficient,
    TaskDensity,
    DeviceCapacity,
    NumDevices,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::EdgeCapacity => "edge_capacity",
            SweepAxis::DropCoefficient => "drop_coefficient",
            SweepAxis::TaskDensity => "task_density",
            SweepAxis::DeviceCapacity => "device_capacity",
            SweepAxis::NumDevices => "num_devices",
        }
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        [
            SweepAxis::EdgeCapacity,
            SweepAxis::DropCoefficient,
            SweepAxis::TaskDensity,
            SweepAxis::DeviceCapacity,
            SweepAxis::NumDevices,
        ]
        .into_iter()
        .find(|a| a.name() == text)
        .ok_or_else(|| HarnessError::Config(format!("unknown sweep axis `{text}`")))
    }

    /// Returns `config` with the axis set to `value`.
    pub fn apply(self, config: &SimConfig, value: f64) -> Result<SimConfig, HarnessError> {
        let mut c = config.clone();
        match self {
            SweepAxis::EdgeCapacity => c.edge_capacity_ghz = vec![value],
            SweepAxis::DropCoefficient => c.drop_coefficient = value,
            SweepAxis::TaskDensity => c.task_density = value,
            SweepAxis::DeviceCapacity => c.device_capacity_ghz = value,
            SweepAxis::NumDevices => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(HarnessError::Config(format!("num_devices {value} is not a positive integer")));
                }
                c.num_devices = value as usize;
            }
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// Policies compared at each value, each assigned to every device.
    /// Defaults to the experiment's own assignment.
    #[serde(default)]
    pub policies: Vec<String>,
}

fn desk_scale() -> SimConfig {
    SimConfig {
        num_devices: 4,
        ..SimConfig::default()
    }
}

/// An experiment file.
///
/// ```toml
/// seeds = [0, 1, 2]
/// policies = ["random"]      # cycled over devices; "bridge" = remote client
/// episodes = 20
/// steps = 200
///
/// [sim]
/// num_devices = 4
/// drop_coefficient = 1.5
///
/// [sweep]
/// axis = "drop_coefficient"
/// values = [1.0, 1.5, 2.0]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSpec {
    pub sim: SimConfig,
    pub policies: Vec<String>,
    pub episodes: usize,
    pub steps: u64,
    pub gamma_period: usize,
    pub initial_gamma: f64,
    pub cost_mode: CostMode,
    pub drop_mode: DropMode,
    pub seeds: Vec<u64>,
    /// Address of a listening client, used for `bridge` devices.
    pub bridge: Option<String>,
    /// Worker threads for independent seeds; 0 picks the core count.
    pub threads: usize,
    pub sweep: Option<SweepSpec>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            sim: desk_scale(),
            policies: vec!["random".into()],
            episodes: 20,
            steps: 200,
            gamma_period: 50,
            initial_gamma: 0.0,
            cost_mode: CostMode::Fractional,
            drop_mode: DropMode::FoldIn,
            seeds: vec![0, 1, 2],
            bridge: None,
            threads: 0,
            sweep: None,
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let spec: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.validate_local()?;
        if self.bridge.is_none() && self.assignment()?.contains(&PolicySpec::Bridge) {
            return Err(HarnessError::Config("`bridge` policy needs a `bridge` endpoint".into()));
        }
        Ok(())
    }

    /// Everything except the `bridge` endpoint requirement.
    pub fn validate_local(&self) -> Result<(), HarnessError> {
        self.sim.validate()?;
        self.plan().validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("seeds must not be empty".into()));
        }
        let assignment = self.assignment()?;
        let space = ActionSpace::of(&self.sim);
        for p in &assignment {
            if let PolicySpec::Baseline(k) = p {
                k.validate(space)?;
            }
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(HarnessError::Config("sweep values must not be empty".into()));
            }
            for &v in &s.values {
                s.axis.apply(&self.sim, v)?;
            }
            for p in &s.policies {
                PolicySpec::parse(p)?;
            }
        }
        Ok(())
    }

    pub fn plan(&self) -> SessionPlan {
        SessionPlan {
            episodes: self.episodes,
            steps: self.steps,
            initial_gamma: self.initial_gamma,
            gamma_period: self.gamma_period,
            cost_mode: self.cost_mode,
            drop_mode: self.drop_mode,
        }
    }

    /// Policies as written, cycled over devices when run.
    pub fn assignment(&self) -> Result<Vec<PolicySpec>, HarnessError> {
        if self.policies.is_empty() {
            return Err(HarnessError::Config("policies must not be empty".into()));
        }
        self.policies.iter().map(|p| PolicySpec::parse(p)).collect()
    }

    pub fn policy_label(&self) -> String {
        self.policies.join("+")
    }
}

/// One device-episode of one seeded run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub seed: u64,
    pub policy: String,
    pub episode: usize,
    pub device: usize,
    pub avg_aoi: f64,
    pub gamma: f64,
    pub next_gamma: f64,
    pub drop_rate: f64,
}

/// Mean and sample standard deviation across seeds of one device-episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub episode: usize,
    pub device: usize,
    pub seeds: usize,
    pub aoi_mean: f64,
    pub aoi_std: f64,
    pub gamma_mean: f64,
    pub gamma_std: f64,
    pub drop_rate_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
    pub aggregate: Vec<AggregateRow>,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl ResultsTable {
    fn from_rows(rows: Vec<ResultRow>) -> Self {
        let mut keys: Vec<(usize, usize)> = rows.iter().map(|r| (r.episode, r.device)).collect();
        keys.sort_unstable();
        keys.dedup();
        let aggregate = keys
            .into_iter()
            .map(|(episode, device)| {
                let group: Vec<&ResultRow> = rows
                    .iter()
                    .filter(|r| r.episode == episode && r.device == device)
                    .collect();
                let col = |f: fn(&ResultRow) -> f64| group.iter().map(|r| f(r)).collect::<Vec<f64>>();
                let (aoi_mean, aoi_std) = mean_std(&col(|r| r.avg_aoi));
                let (gamma_mean, gamma_std) = mean_std(&col(|r| r.gamma));
                let (drop_rate_mean, _) = mean_std(&col(|r| r.drop_rate));
                AggregateRow {
                    episode,
                    device,
                    seeds: group.len(),
                    aoi_mean,
                    aoi_std,
                    gamma_mean,
                    gamma_std,
                    drop_rate_mean,
                }
            })
            .collect();
        Self { rows, aggregate }
    }

    /// Per-seed score: mean over devices of the average AoI in the final
    /// fifth of the episodes (at least one).
    pub fn seed_scores(&self) -> Vec<(u64, f64)> {
        let episodes = self.rows.iter().map(|r| r.episode + 1).max().unwrap_or(0);
        let tail_from = episodes - episodes.div_ceil(5).max(1);
        let mut seeds: Vec<u64> = self.rows.iter().map(|r| r.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        seeds
            .into_iter()
            .map(|s| {
                let tail: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.seed == s && r.episode >= tail_from)
                    .map(|r| r.avg_aoi)
                    .collect();
                (s, mean_std(&tail).0)
            })
            .collect()
    }

    pub fn drop_rate(&self) -> f64 {
        mean_std(&self.rows.iter().map(|r| r.drop_rate).collect::<Vec<_>>()).0
    }

    pub fn write_rows<W: io::Write>(&self, out: W) -> Result<(), HarnessError> {
        write_csv(out, &self.rows)
    }

    pub fn write_aggregate<W: io::Write>(&self, out: W) -> Result<(), HarnessError> {
        write_csv(out, &self.aggregate)
    }
}

fn write_csv<W: io::Write, T: Serialize>(out: W, rows: &[T]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn rows_from_stats(seed: u64, policy: &str, stats: &[EpisodeStat]) -> Vec<ResultRow> {
    stats
        .iter()
        .map(|s| ResultRow {
            seed,
            policy: policy.to_string(),
            episode: s.episode,
            device: s.device,
            avg_aoi: s.avg_aoi,
            gamma: s.gamma,
            next_gamma: s.next_gamma,
            drop_rate: s.drops as f64 / s.tasks as f64,
        })
        .collect()
}

/// Builds the session for one seed. Devices assigned `bridge` are left for
/// remote clients; with `all_remote`, every device is.
pub fn build_session(spec: &ExperimentSpec, seed: u64, all_remote: bool) -> Result<Session, HarnessError> {
    let mut config = spec.sim.clone();
    config.seed = seed;
    let assignment = spec.assignment()?;
    let space = ActionSpace::of(&config);
    let local: Vec<Option<Box<dyn SchedulingPolicy + Send>>> = (0..config.num_devices)
        .map(|d| match assignment[d % assignment.len()] {
            PolicySpec::Baseline(kind) if !all_remote => {
                Some(Box::new(BaselinePolicy::new(kind, space, seed, d)) as Box<dyn SchedulingPolicy + Send>)
            }
            _ => None,
        })
        .collect();
    Ok(Session::new(config, spec.plan(), local)?)
}

pub fn rows_for_session(spec: &ExperimentSpec, seed: u64, session: &Session) -> Vec<ResultRow> {
    rows_from_stats(seed, &spec.policy_label(), session.stats())
}

fn run_seed(spec: &ExperimentSpec, seed: u64) -> Result<Vec<ResultRow>, HarnessError> {
    let mut session = build_session(spec, seed, false)?;
    let remote = (0..spec.sim.num_devices).any(|d| session.is_remote(d));
    if remote {
        let addr = spec.bridge.as_deref().expect("validated");
        serve_connect(&mut session, addr)?;
    } else {
        session.run_local()?;
    }
    Ok(rows_from_stats(seed, &spec.policy_label(), session.stats()))
}

/// Runs every seed of `spec`, in parallel when no device is remote.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultsTable, HarnessError> {
    spec.validate()?;
    let remote = spec.assignment()?.contains(&PolicySpec::Bridge);
    let threads = if remote {
        1
    } else if spec.threads == 0 {
        thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        spec.threads
    };
    let mut per_seed: Vec<Result<Vec<ResultRow>, HarnessError>> = Vec::new();
    for chunk in spec.seeds.chunks(threads.max(1)) {
        if chunk.len() == 1 {
            per_seed.push(run_seed(spec, chunk[0]));
            continue;
        }
        thread::scope(|scope| {
            let handles: Vec<_> = chunk.iter().map(|&s| scope.spawn(move || run_seed(spec, s))).collect();
            for h in handles {
                per_seed.push(h.join().expect("worker panicked"));
            }
        });
    }
    let mut rows = Vec::new();
    for r in per_seed {
        rows.extend(r?);
    }
    Ok(ResultsTable::from_rows(rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub policy: String,
    pub note: String,
    pub mean_aoi: f64,
    pub std_aoi: f64,
    pub drop_rate: f64,
    pub seeds: usize,
}

/// One experiment per `(value, policy)`; the experiment's own `sweep` section
/// provides the axis, values and policies.
pub fn sweep(spec: &ExperimentSpec) -> Result<Vec<SweepRow>, HarnessError> {
    spec.validate()?;
    let s = spec
        .sweep
        .as_ref()
        .ok_or_else(|| HarnessError::Config("experiment has no [sweep] section".into()))?;
    let policies: Vec<Vec<String>> = if s.policies.is_empty() {
        vec![spec.policies.clone()]
    } else {
        s.policies.iter().map(|p| vec![p.clone()]).collect()
    };
    let mut out = Vec::new();
    for &value in &s.values {
        let sim = s.axis.apply(&spec.sim, value)?;
        for assignment in &policies {
            let point = ExperimentSpec {
                sim: sim.clone(),
                policies: assignment.clone(),
                sweep: None,
                ..spec.clone()
            };
            let table = run_experiment(&point)?;
            let scores: Vec<f64> = table.seed_scores().into_iter().map(|(_, v)| v).collect();
            let (mean_aoi, std_aoi) = mean_std(&scores);
            let note = if assignment.iter().any(|p| p == "zero_wait_shortest_queue") {
                "sanity baseline, not in the reference comparison"
            } else {
                ""
            };
            out.push(SweepRow {
                axis: s.axis.name().into(),
                value,
                policy: point.policy_label(),
                note: note.into(),
                mean_aoi,
                std_aoi,
                drop_rate: table.drop_rate(),
                seeds: scores.len(),
            });
        }
    }
    Ok(out)
}

pub fn write_sweep_csv<W: io::Write>(out: W, rows: &[SweepRow]) -> Result<(), HarnessError> {
    write_csv(out, rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub gammas: Vec<f64>,
    pub gamma_star: Option<f64>,
    pub ratios: Vec<f64>,
    /// Least-squares slope of `ln|γ_i − γ*|`, exponentiated.
    pub fitted_rate: Option<f64>,
    /// Mean of the second half of the admissible ratios. An initial guess
    /// below `γ*` is left out of the ratios.
    pub tail_mean: Option<f64>,
    pub alpha: Option<f64>,
    /// `γ_{i+1} ≤ γ_i` from the second iterate on.
    pub monotone: bool,
    pub pass: bool,
    pub reasons: Vec<String>,
}

/// Tail-mean tolerance around `α` (inclusive).
pub const RATE_TOLERANCE: f64 = 0.05;

/// Absorbs floating-point rounding when a tail mean sits on the boundary.
pub const ROUNDING_GUARD: f64 = 1e-6;

/// Linear-rate diagnostics for a trace. Without `gamma_star` only
/// monotonicity is checked; `alpha` adds the tail-mean check.
pub fn convergence_report(trace: &FqlTrace, gamma_star: Option<f64>, alpha: Option<f64>) -> ConvergenceReport {
    let gammas = trace.gammas();
    let monotone = gammas.iter().skip(1).zip(gammas.iter().skip(2)).all(|(a, b)| *b <= *a + 1e-12 * a.abs().max(1.0));
    let mut reasons = Vec::new();
    if !monotone {
        reasons.push("quotient sequence is not nonincreasing after the first update".into());
    }
    let (mut ratios, mut fitted_rate, mut tail_mean) = (Vec::new(), None, None);
    if let Some(star) = gamma_star {
        // an initial guess below γ* overshoots on the first update
        let skip = usize::from(gammas[0] < star - RATE_EXCLUSION);
        let tail_seq = &gammas[skip..];
        ratios = tail_seq
            .windows(2)
            .filter(|w| (w[0] - star).abs() >= RATE_EXCLUSION)
            .map(|w| (w[1] - star) / (w[0] - star))
            .collect();
        // a step that lands on γ* has ratio 0 and counts as converged
        let bad = tail_seq
            .windows(2)
            .filter(|w| (w[0] - star).abs() >= RATE_EXCLUSION && (w[1] - star).abs() >= RATE_EXCLUSION)
            .map(|w| (w[1] - star) / (w[0] - star))
            .find(|r| !(*r > 0.0 && *r < 1.0));
        if let Some(bad) = bad {
            reasons.push(format!("ratio {bad} outside (0, 1)"));
        }
        let pts: Vec<(f64, f64)> = tail_seq
            .iter()
            .enumerate()
            .filter(|(_, g)| (*g - star).abs() >= RATE_EXCLUSION)
            .map(|(i, g)| (i as f64, (g - star).abs().ln()))
            .collect();
        if pts.len() >= 2 {
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
            fitted_rate = Some((sxy / sxx).exp());
        }
        if !ratios.is_empty() {
            let tail = &ratios[ratios.len() / 2..];
            tail_mean = Some(tail.iter().sum::<f64>() / tail.len() as f64);
        }
        if let (Some(a), Some(t)) = (alpha, tail_mean) {
            if (t - a).abs() > RATE_TOLERANCE + ROUNDING_GUARD {
                reasons.push(format!("tail-mean ratio {t:.4} not within {a} ± {RATE_TOLERANCE}"));
            }
        }
        if alpha.is_some() && tail_mean.is_none() {
            reasons.push("no admissible ratios".into());
        }
    }
    ConvergenceReport {
        gammas,
        gamma_star,
        ratios,
        fitted_rate,
        tail_mean,
        alpha,
        monotone,
        pass: reasons.is_empty(),
        reasons,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fql::{run_fql_with, ControlledErrorInner, ExactInner, InnerOutcome, InnerSolver, OuterConfig};
    use crate::fql::{FqlError, InnerResult};
    use crate::mdp::{enumerate_oracle, FractionalMdp};

    fn two_action() -> FractionalMdp {
        FractionalMdp::new(1, 2, vec![1.0, 1.0], vec![2.0, 3.0], vec![1.0, 2.0], 0.5, 0).unwrap()
    }

    fn small_spec() -> ExperimentSpec {
        ExperimentSpec {
            episodes: 3,
            steps: 30,
            gamma_period: 1,
            seeds: vec![4, 5],
            ..ExperimentSpec::default()
        }
    }

    #[test]
    fn spec_parses_and_validates() {
        let spec = ExperimentSpec::from_toml_str(
            r#"
            seeds = [1]
            policies = ["random", "fixed_wait(1.5)"]
            episodes = 2
            steps = 10
            [sim]
            num_devices = 2
            [sweep]
            axis = "num_devices"
            values = [10, 20]
            "#,
        )
        .unwrap();
        assert_eq!(spec.sim.num_devices, 2);
        assert_eq!(spec.sweep.unwrap().values, vec![10.0, 20.0]);
        let bad = [
            "seeds = []",
            "policies = [\"greedy\"]",
            "policies = [\"bridge\"]",
            "[sweep]\naxis = \"drop_coefficient\"\nvalues = []",
            "[sweep]\naxis = \"num_devices\"\nvalues = [1.5]",
            "episodes = 0",
            "unknown = 1",
        ];
        for text in bad {
            assert!(ExperimentSpec::from_toml_str(text).unwrap_err().is_config(), "{text}");
        }
    }

    #[test]
    fn runs_are_deterministic_and_aggregated() {
        let spec = small_spec();
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&ExperimentSpec { threads: 1, ..spec.clone() }).unwrap();
        assert_eq!(a, b);
        let mut csv_a = Vec::new();
        a.write_rows(&mut csv_a).unwrap();
        let mut csv_b = Vec::new();
        b.write_rows(&mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);
        assert_eq!(a.rows.len(), 2 * 3 * 4);
        assert_eq!(a.aggregate.len(), 3 * 4);
        for agg in &a.aggregate {
            let vals: Vec<f64> = a
                .rows
                .iter()
                .filter(|r| r.episode == agg.episode && r.device == agg.device)
                .map(|r| r.avg_aoi)
                .collect();
            let mean = (vals[0] + vals[1]) / 2.0;
            let std = ((vals[0] - mean).powi(2) + (vals[1] - mean).powi(2)).sqrt();
            assert!((agg.aoi_mean - mean).abs() <= 1e-12 * mean);
            assert!((agg.aoi_std - std).abs() <= 1e-9 * mean);
        }
    }

    #[test]
    fn degenerate_single_row() {
        let spec = ExperimentSpec {
            episodes: 1,
            steps: 1,
            seeds: vec![0],
            sim: SimConfig {
                num_devices: 1,
                ..SimConfig::default()
            },
            ..ExperimentSpec::default()
        };
        let t = run_experiment(&spec).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.aggregate.len(), 1);
    }

    #[test]
    fn sweep_shape() {
        let spec = ExperimentSpec {
            seeds: vec![0],
            sweep: Some(SweepSpec {
                axis: SweepAxis::DropCoefficient,
                values: vec![1.0, 1.5, 2.0],
                policies: vec!["random".into(), "zero_wait_shortest_queue".into()],
            }),
            ..small_spec()
        };
        let rows = sweep(&spec).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows.iter().filter(|r| r.policy == "random").count(), 3);
        assert!(rows.iter().any(|r| !r.note.is_empty()));
    }

    #[test]
    fn exact_inner_report_passes() {
        let mdp = two_action();
        let star = enumerate_oracle(&mdp).unwrap().gamma_star;
        assert!((star - 1.5).abs() < 1e-12);
        let trace = run_fql_with(
            &mut ExactInner { mdp: &mdp, tol: 1e-12 },
            3.0,
            OuterConfig {
                episodes: 5,
                tolerance: 1e-9,
            },
        )
        .unwrap();
        let r = convergence_report(&trace, Some(star), None);
        assert!(r.pass, "{:?}", r.reasons);
    }

    #[test]
    fn controlled_error_half_passes() {
        let mdp = two_action();
        let trace = run_fql_with(
            &mut ControlledErrorInner {
                mdp: &mdp,
                alpha: 0.5,
                fraction: 0.9,
            },
            3.0,
            OuterConfig {
                episodes: 40,
                tolerance: 1e-12,
            },
        )
        .unwrap();
        let r = convergence_report(&trace, Some(1.5), Some(0.5));
        assert!(r.pass, "{:?}", r.reasons);
    }

    struct Broken<'a>(&'a FractionalMdp);

    impl InnerSolver for Broken<'_> {
        fn solve(&mut self, gamma: f64, episode: usize) -> Result<InnerOutcome, FqlError> {
            let mut o = ExactInner { mdp: self.0, tol: 1e-12 }.solve(gamma, episode)?;
            let r: &mut InnerResult = &mut o.result;
            let eps = 3.0 * r.q0.abs() + 0.5;
            r.n0 += eps;
            r.q0 += eps;
            Ok(o)
        }
    }

    #[test]
    fn broken_inner_is_flagged() {
        let mdp = two_action();
        let trace = run_fql_with(
            &mut Broken(&mdp),
            3.0,
            OuterConfig {
                episodes: 10,
                tolerance: 1e-12,
            },
        )
        .unwrap();
        let r = convergence_report(&trace, Some(1.5), Some(0.5));
        assert!(!r.pass);
        let no_star = convergence_report(&trace, None, None);
        assert!(no_star.ratios.is_empty());
    }
}
