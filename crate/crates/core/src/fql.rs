//! Fractional Q-Learning.
//!
//! The outer loop walks the quotient coefficient `γ_{i+1} = N_i / D_i`; the
//! inner loop approximates `Q*_{γ_i}` from samples with Speedy Q-Learning
//! while carrying the numerator and denominator tables `N`, `D` so that
//! `Q = N - γ D` throughout.

use std::io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{argmin, solve_given_gamma, FractionalMdp, MdpError};

/// Constant in the sample-complexity bound for the inner loop.
pub const STEP_BOUND_CONSTANT: f64 = 11.66;

/// Ratios whose reference gap `|γ_i - γ*|` is below this are not admissible.
pub const RATE_EXCLUSION: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum FqlError {
    #[error("argument out of range: {0}")]
    Argument(String),
    #[error("denominator estimate {0} is not positive")]
    NonPositiveDenominator(f64),
    #[error("stopping condition unsatisfiable: Q(s0, a) = {} >= 0 after {} steps", .partial.q0, .partial.steps)]
    StopUnsatisfiable { partial: InnerResult },
    #[error("inner loop failed in episode {episode}: {source}")]
    Inner {
        episode: usize,
        #[source]
        source: Box<FqlError>,
        partial: Box<FqlTrace>,
    },
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error("trace csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopMode {
    /// Run a fixed number of synchronous sweeps.
    BoundSteps,
    /// Stop once the residual certificate satisfies `ε̂ < -α Q(s0, a)`.
    Residual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub alpha: f64,
    pub mode: StopMode,
    /// Sweep budget; required for `BoundSteps`, a safety cap for `Residual`.
    pub budget: Option<usize>,
}

impl StopRule {
    pub fn bound_steps(alpha: f64, steps: usize) -> Self {
        Self {
            alpha,
            mode: StopMode::BoundSteps,
            budget: Some(steps),
        }
    }

    pub fn residual(alpha: f64, max_steps: usize) -> Self {
        Self {
            alpha,
            mode: StopMode::Residual,
            budget: Some(max_steps),
        }
    }

    pub fn validate(&self) -> Result<(), FqlError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(FqlError::Argument(format!(
                "alpha {} must lie in (0, 1)",
                self.alpha
            )));
        }
        match (self.mode, self.budget) {
            (_, Some(0)) => Err(FqlError::Argument("step budget must be >= 1".into())),
            (StopMode::BoundSteps, None) => Err(FqlError::Argument(
                "bound_steps mode needs a step budget".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// What one inner loop hands to the outer update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerResult {
    pub q0: f64,
    pub n0: f64,
    pub d0: f64,
    pub a_star: usize,
    pub steps: usize,
    pub epsilon_hat: f64,
}

/// A generative model: any `(s, a)` can be sampled on demand.
pub trait GenerativeModel {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn discount(&self) -> f64;
    fn initial_state(&self) -> usize;
    /// Returns `(s', c_N, c_D)`.
    fn sample<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> (usize, f64, f64);
}

impl GenerativeModel for FractionalMdp {
    fn num_states(&self) -> usize {
        FractionalMdp::num_states(self)
    }

    fn num_actions(&self) -> usize {
        FractionalMdp::num_actions(self)
    }

    fn discount(&self) -> f64 {
        FractionalMdp::discount(self)
    }

    fn initial_state(&self) -> usize {
        FractionalMdp::initial_state(self)
    }

    fn sample<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> (usize, f64, f64) {
        (self.sample_next(s, a, rng), self.cost_n(s, a), self.cost_d(s, a))
    }
}

/// Inner-loop step budget `⌈11.66 ln(2|Z| / (Eζ)) / α²⌉`.
///
/// The budget depends only on its arguments, so it is the same for every
/// episode of a run.
pub fn inner_steps_bound(
    z_size: usize,
    episodes: usize,
    zeta: f64,
    alpha: f64,
) -> Result<usize, FqlError> {
    if z_size == 0 || episodes == 0 {
        return Err(FqlError::Argument(
            "|Z| and E must be positive".to_string(),
        ));
    }
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(FqlError::Argument(format!("zeta {zeta} must lie in (0, 1)")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(FqlError::Argument(format!("alpha {alpha} must lie in (0, 1)")));
    }
    let arg = 2.0 * z_size as f64 / (episodes as f64 * zeta);
    if arg <= 1.0 {
        return Err(FqlError::Argument(format!(
            "2|Z|/(E zeta) = {arg} must exceed 1"
        )));
    }
    Ok((STEP_BOUND_CONSTANT * arg.ln() / (alpha * alpha)).ceil() as usize)
}

struct Tables {
    q: Vec<f64>,
    n: Vec<f64>,
    d: Vec<f64>,
}

impl Tables {
    fn zeros(len: usize) -> Self {
        Self {
            q: vec![0.0; len],
            n: vec![0.0; len],
            d: vec![0.0; len],
        }
    }
}

/// Speedy Q-Learning at a fixed `γ`, with synchronous sweeps over all
/// state-action pairs and learning rate `1/(k+1)`.
///
/// `D` is a Speedy evaluation of the current greedy policy: both of its
/// bootstrap terms use the greedy action of the latest `Q`. `N` is then
/// `Q + γ D`. Bootstrapping `D` through two different greedy actions, as `Q`
/// does, lets `N` and `D` drift together whenever near-tied actions swap.
pub fn run_inner<M: GenerativeModel>(
    model: &M,
    gamma: f64,
    stop: &StopRule,
    rng_seed: u64,
) -> Result<InnerResult, FqlError> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    run_inner_with_rng(model, gamma, stop, &mut rng)
}

fn run_inner_with_rng<M: GenerativeModel, R: Rng>(
    model: &M,
    gamma: f64,
    stop: &StopRule,
    rng: &mut R,
) -> Result<InnerResult, FqlError> {
    stop.validate()?;
    if !gamma.is_finite() {
        return Err(FqlError::Argument(format!("gamma {gamma} is not finite")));
    }
    let ns = model.num_states();
    let na = model.num_actions();
    let delta = model.discount();
    let s0 = model.initial_state();
    let budget = stop.budget.unwrap_or(1_000_000);

    let mut prev = Tables::zeros(ns * na);
    let mut cur = Tables::zeros(ns * na);
    let mut next = Tables::zeros(ns * na);
    let mut greedy_prev = vec![0usize; ns];
    let mut greedy_cur = vec![0usize; ns];
    let mut epsilon_hat = f64::INFINITY;
    let mut steps = 0;

    for k in 0..budget {
        let lr = 1.0 / (k as f64 + 1.0);
        for s in 0..ns {
            greedy_prev[s] = argmin(&prev.q[s * na..(s + 1) * na]);
            greedy_cur[s] = argmin(&cur.q[s * na..(s + 1) * na]);
        }
        for s in 0..ns {
            for a in 0..na {
                let z = s * na + a;
                let (succ, cn, cd) = model.sample(s, a, rng);
                let zp = succ * na + greedy_prev[succ];
                let zc = succ * na + greedy_cur[succ];
                let c = cn - gamma * cd;
                let sql = |x: f64, t_prev: f64, t_cur: f64| {
                    x + lr * (t_prev - x) + (1.0 - lr) * (t_cur - t_prev)
                };
                next.q[z] = sql(cur.q[z], c + delta * prev.q[zp], c + delta * cur.q[zc]);
                next.d[z] = sql(cur.d[z], cd + delta * prev.d[zc], cd + delta * cur.d[zc]);
                next.n[z] = next.q[z] + gamma * next.d[z];
            }
        }
        let change = next
            .q
            .iter()
            .zip(&cur.q)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        epsilon_hat = delta / (1.0 - delta) * change;
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
        steps = k + 1;

        if stop.mode == StopMode::Residual {
            let a = argmin(&cur.q[s0 * na..(s0 + 1) * na]);
            let q0 = cur.q[s0 * na + a];
            if q0 < 0.0 && epsilon_hat < -stop.alpha * q0 {
                break;
            }
        }
    }

    let a_star = argmin(&cur.q[s0 * na..(s0 + 1) * na]);
    let z = s0 * na + a_star;
    let result = InnerResult {
        q0: cur.q[z],
        n0: cur.n[z],
        d0: cur.d[z],
        a_star,
        steps,
        epsilon_hat,
    };
    if stop.mode == StopMode::Residual && result.q0 >= 0.0 {
        return Err(FqlError::StopUnsatisfiable { partial: result });
    }
    Ok(result)
}

/// Quotient update `γ_{i+1} = N_i(s0, a_i) / D_i(s0, a_i)`.
pub fn outer_update(inner: &InnerResult) -> Result<f64, FqlError> {
    if !(inner.d0 > 0.0) {
        return Err(FqlError::NonPositiveDenominator(inner.d0));
    }
    Ok(inner.n0 / inner.d0)
}

/// One inner solve as seen by the outer loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerOutcome {
    pub result: InnerResult,
    /// The stopping condition could not be met; the episode ran its budget.
    pub fallback: bool,
}

/// Anything that can approximate `Q*_γ` at the initial state.
pub trait InnerSolver {
    fn solve(&mut self, gamma: f64, episode: usize) -> Result<InnerOutcome, FqlError>;
}

/// Sampled inner loop over a generative model; episode `i` draws from
/// ChaCha stream `i` of the run seed.
pub struct SpeedyInner<'a, M> {
    pub model: &'a M,
    pub stop: StopRule,
    pub seed: u64,
}

impl<M: GenerativeModel> InnerSolver for SpeedyInner<'_, M> {
    fn solve(&mut self, gamma: f64, episode: usize) -> Result<InnerOutcome, FqlError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(episode as u64);
        match run_inner_with_rng(self.model, gamma, &self.stop, &mut rng) {
            Ok(result) => Ok(InnerOutcome {
                result,
                fallback: false,
            }),
            Err(FqlError::StopUnsatisfiable { partial }) => Ok(InnerOutcome {
                result: partial,
                fallback: true,
            }),
            Err(e) => Err(e),
        }
    }
}

/// Exact inner solutions from value iteration plus policy polishing.
pub struct ExactInner<'a> {
    pub mdp: &'a FractionalMdp,
    pub tol: f64,
}

impl InnerSolver for ExactInner<'_> {
    fn solve(&mut self, gamma: f64, _episode: usize) -> Result<InnerOutcome, FqlError> {
        let table = solve_given_gamma(self.mdp, gamma, self.tol)?;
        let s0 = self.mdp.initial_state();
        let a = table.greedy_action(s0);
        Ok(InnerOutcome {
            result: InnerResult {
                q0: table.q(s0, a),
                n0: table.n(s0, a),
                d0: table.d(s0, a),
                a_star: a,
                steps: 1,
                epsilon_hat: 0.0,
            },
            fallback: false,
        })
    }
}

/// Exact inner solutions with a known error injected into the numerator
/// channel: `ε_i = fraction · α · |Q*_{γ_i}(s0, a_i)|`, so the stopping
/// condition holds with margin `fraction`.
pub struct ControlledErrorInner<'a> {
    pub mdp: &'a FractionalMdp,
    pub alpha: f64,
    pub fraction: f64,
}

impl InnerSolver for ControlledErrorInner<'_> {
    fn solve(&mut self, gamma: f64, episode: usize) -> Result<InnerOutcome, FqlError> {
        let mut exact = ExactInner {
            mdp: self.mdp,
            tol: 1e-12,
        }
        .solve(gamma, episode)?;
        let r = &mut exact.result;
        let eps = self.fraction * self.alpha * r.q0.abs();
        r.n0 += eps;
        r.q0 += eps;
        r.epsilon_hat = eps;
        Ok(exact)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub gamma: f64,
    pub inner: InnerResult,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FqlTrace {
    pub episodes: Vec<EpisodeRecord>,
    pub gamma_final: f64,
    pub converged: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    episode: usize,
    gamma: f64,
    q0: f64,
    n0: f64,
    d0: f64,
    steps: usize,
    epsilon_hat: f64,
}

impl FqlTrace {
    /// `γ_1, ..., γ_E, γ_final`.
    pub fn gammas(&self) -> Vec<f64> {
        let mut g: Vec<f64> = self.episodes.iter().map(|e| e.gamma).collect();
        g.push(self.gamma_final);
        g
    }

    /// CSV with columns `episode,gamma,q0,n0,d0,steps,epsilon_hat`; episodes
    /// are numbered from 1.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), FqlError> {
        let mut w = csv::Writer::from_writer(out);
        for (i, e) in self.episodes.iter().enumerate() {
            w.serialize(TraceRow {
                episode: i + 1,
                gamma: e.gamma,
                q0: e.inner.q0,
                n0: e.inner.n0,
                d0: e.inner.d0,
                steps: e.inner.steps,
                epsilon_hat: e.inner.epsilon_hat,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Rebuilds a trace from its CSV form. `gamma_final` is recomputed from
    /// the last row's `n0 / d0`; action and fallback flags are not stored.
    pub fn read_csv<R: io::Read>(input: R) -> Result<Self, FqlError> {
        let mut r = csv::Reader::from_reader(input);
        let mut episodes = Vec::new();
        for row in r.deserialize() {
            let row: TraceRow = row?;
            episodes.push(EpisodeRecord {
                gamma: row.gamma,
                inner: InnerResult {
                    q0: row.q0,
                    n0: row.n0,
                    d0: row.d0,
                    a_star: 0,
                    steps: row.steps,
                    epsilon_hat: row.epsilon_hat,
                },
                fallback: false,
            });
        }
        let last = episodes
            .last()
            .ok_or_else(|| FqlError::Argument("trace has no episodes".into()))?;
        let gamma_final = outer_update(&last.inner)?;
        Ok(Self {
            episodes,
            gamma_final,
            converged: false,
        })
    }
}

/// Options for the outer loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuterConfig {
    pub episodes: usize,
    /// `converged` is set once two consecutive updates move `γ` by at most this.
    pub tolerance: f64,
}

/// Alternates inner solves and quotient updates for `config.episodes` rounds.
pub fn run_fql_with<S: InnerSolver>(
    solver: &mut S,
    gamma_1: f64,
    config: OuterConfig,
) -> Result<FqlTrace, FqlError> {
    if config.episodes == 0 {
        return Err(FqlError::Argument("need at least one episode".into()));
    }
    if !gamma_1.is_finite() {
        return Err(FqlError::Argument(format!("gamma_1 {gamma_1} is not finite")));
    }
    let mut trace = FqlTrace {
        gamma_final: gamma_1,
        ..FqlTrace::default()
    };
    let mut gamma = gamma_1;
    let mut calm = 0;
    for episode in 0..config.episodes {
        let outcome = solver.solve(gamma, episode).and_then(|o| {
            let next = outer_update(&o.result)?;
            Ok((o, next))
        });
        let (outcome, next) = match outcome {
            Ok(v) => v,
            Err(source) => {
                return Err(FqlError::Inner {
                    episode: episode + 1,
                    source: Box::new(source),
                    partial: Box::new(trace),
                })
            }
        };
        if outcome.fallback {
            log::warn!("episode {}: stopping condition unmet, used step budget", episode + 1);
        }
        trace.episodes.push(EpisodeRecord {
            gamma,
            inner: outcome.result,
            fallback: outcome.fallback,
        });
        calm = if (next - gamma).abs() <= config.tolerance {
            calm + 1
        } else {
            0
        };
        trace.converged = calm >= 2;
        trace.gamma_final = next;
        gamma = next;
    }
    Ok(trace)
}

/// Fractional Q-Learning with the sampled Speedy Q-Learning inner loop.
pub fn run_fql<M: GenerativeModel>(
    model: &M,
    gamma_1: f64,
    stop: StopRule,
    episodes: usize,
    rng_seed: u64,
) -> Result<FqlTrace, FqlError> {
    stop.validate()?;
    let mut inner = SpeedyInner {
        model,
        stop,
        seed: rng_seed,
    };
    run_fql_with(
        &mut inner,
        gamma_1,
        OuterConfig {
            episodes,
            tolerance: 1e-3,
        },
    )
}

/// Successive error ratios `(γ_{i+1} - γ*) / (γ_i - γ*)`, skipping any `i`
/// with `|γ_i - γ*| < 1e-9`.
pub fn rate_diagnostics(trace: &FqlTrace, gamma_star: f64) -> Vec<f64> {
    trace
        .gammas()
        .windows(2)
        .filter(|w| (w[0] - gamma_star).abs() >= RATE_EXCLUSION)
        .map(|w| (w[1] - gamma_star) / (w[0] - gamma_star))
        .collect()
}
