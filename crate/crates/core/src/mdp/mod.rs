//! Finite fractional MDPs and their exact solvers.
//!
//! A fractional MDP carries two cost channels, a numerator `c_N` and a
//! strictly positive denominator `c_D`, and the objective is the ratio of
//! their discounted expectations from a fixed initial state. All solvers here
//! minimize; ties between actions go to the lowest index.

mod text;

pub use text::{parse_mdp, write_mdp};

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used when checking that transition rows are stochastic.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Largest policy space [`enumerate_oracle`] will walk.
pub const MAX_ENUMERATED_POLICIES: u64 = 1_000_000;

/// Relative slack used to decide that two action values tie.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("mdp must have at least one state and one action")]
    Empty,
    #[error("table `{table}` has {got} entries, expected {expected}")]
    Shape {
        table: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("transition row (s={state}, a={action}) sums to {sum}, not 1")]
    NotStochastic { state: usize, action: usize, sum: f64 },
    #[error("transition probability at (s={state}, a={action}) is negative or non-finite")]
    BadProbability { state: usize, action: usize },
    #[error("numerator cost at (s={state}, a={action}) is {value}; must be finite and >= 0")]
    NegativeNumerator { state: usize, action: usize, value: f64 },
    #[error("denominator cost at (s={state}, a={action}) is {value}; must be finite and > 0")]
    NonPositiveDenominator { state: usize, action: usize, value: f64 },
    #[error("discount {0} must lie strictly inside (0, 1)")]
    Discount(f64),
    #[error("state {state} out of range (num_states = {num_states})")]
    StateOutOfRange { state: usize, num_states: usize },
    #[error("action {action} out of range (num_actions = {num_actions})")]
    ActionOutOfRange { action: usize, num_actions: usize },
    #[error("policy covers {got} states, expected {expected}")]
    PolicyLength { expected: usize, got: usize },
    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),
    #[error("instance has {policies} deterministic policies, limit is {limit}")]
    TooLarge { policies: u64, limit: u64 },
    #[error("dinkelbach did not converge in {iterations} iterations (last gamma {last_gamma})")]
    NoConvergence {
        iterations: usize,
        last_gamma: f64,
        trace: Vec<f64>,
    },
    #[error("linear system for policy evaluation is singular")]
    Singular,
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Deterministic stationary policy: one action per state.
pub type Policy = Vec<usize>;

/// A finite fractional MDP `(S, A, P, c_N, c_D, δ)` with initial state `s0`.
///
/// Tables are stored row-major: `transition[(s * A + a) * S + s']`,
/// `cost_n[s * A + a]`, `cost_d[s * A + a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalMdp {
    num_states: usize,
    num_actions: usize,
    transition: Vec<f64>,
    cost_n: Vec<f64>,
    cost_d: Vec<f64>,
    discount: f64,
    initial_state: usize,
    d_min: f64,
}

impl FractionalMdp {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transition: Vec<f64>,
        cost_n: Vec<f64>,
        cost_d: Vec<f64>,
        discount: f64,
        initial_state: usize,
    ) -> Result<Self, MdpError> {
        if num_states == 0 || num_actions == 0 {
            return Err(MdpError::Empty);
        }
        let za = num_states * num_actions;
        check_len("transition", za * num_states, transition.len())?;
        check_len("cost_n", za, cost_n.len())?;
        check_len("cost_d", za, cost_d.len())?;
        if !(discount > 0.0 && discount < 1.0) {
            return Err(MdpError::Discount(discount));
        }
        if initial_state >= num_states {
            return Err(MdpError::StateOutOfRange {
                state: initial_state,
                num_states,
            });
        }
        for s in 0..num_states {
            for a in 0..num_actions {
                let z = s * num_actions + a;
                let row = &transition[z * num_states..(z + 1) * num_states];
                if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(MdpError::BadProbability { state: s, action: a });
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(MdpError::NotStochastic {
                        state: s,
                        action: a,
                        sum,
                    });
                }
                let n = cost_n[z];
                if !n.is_finite() || n < 0.0 {
                    return Err(MdpError::NegativeNumerator {
                        state: s,
                        action: a,
                        value: n,
                    });
                }
                let d = cost_d[z];
                if !d.is_finite() || d <= 0.0 {
                    return Err(MdpError::NonPositiveDenominator {
                        state: s,
                        action: a,
                        value: d,
                    });
                }
            }
        }
        let d_min = cost_d.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Self {
            num_states,
            num_actions,
            transition,
            cost_n,
            cost_d,
            discount,
            initial_state,
            d_min,
        })
    }

    /// Random instance with Dirichlet-like transition rows and costs drawn
    /// uniformly from the given ranges.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        num_states: usize,
        num_actions: usize,
        discount: f64,
        cost_n_range: (f64, f64),
        cost_d_range: (f64, f64),
    ) -> Result<Self, MdpError> {
        let za = num_states * num_actions;
        let mut transition = Vec::with_capacity(za * num_states);
        for _ in 0..za {
            let weights: Vec<f64> = (0..num_states)
                .map(|_| -(1.0 - rng.gen::<f64>()).ln())
                .collect();
            let total: f64 = weights.iter().sum();
            let mut row: Vec<f64> = weights.iter().map(|w| w / total).collect();
            // Push rounding residue into the largest entry so the row sums to 1.
            let residue = 1.0 - row.iter().sum::<f64>();
            let (imax, _) = row
                .iter()
                .enumerate()
                .fold((0, f64::MIN), |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc });
            row[imax] += residue;
            transition.extend(row);
        }
        let draw = |rng: &mut R, (lo, hi): (f64, f64)| {
            if hi > lo {
                // (lo, hi]: 1 - gen() lies in (0, 1]
                lo + (hi - lo) * (1.0 - rng.gen::<f64>())
            } else {
                lo
            }
        };
        let cost_n = (0..za).map(|_| draw(rng, cost_n_range)).collect();
        let cost_d = (0..za).map(|_| draw(rng, cost_d_range)).collect();
        Self::new(num_states, num_actions, transition, cost_n, cost_d, discount, 0)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    pub fn with_initial_state(mut self, s0: usize) -> Result<Self, MdpError> {
        if s0 >= self.num_states {
            return Err(MdpError::StateOutOfRange {
                state: s0,
                num_states: self.num_states,
            });
        }
        self.initial_state = s0;
        Ok(self)
    }

    /// Returns a copy with both cost tables replaced.
    pub fn with_costs(&self, cost_n: Vec<f64>, cost_d: Vec<f64>) -> Result<Self, MdpError> {
        Self::new(
            self.num_states,
            self.num_actions,
            self.transition.clone(),
            cost_n,
            cost_d,
            self.discount,
            self.initial_state,
        )
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let z = s * self.num_actions + a;
        &self.transition[z * self.num_states..(z + 1) * self.num_states]
    }

    pub fn cost_n(&self, s: usize, a: usize) -> f64 {
        self.cost_n[s * self.num_actions + a]
    }

    pub fn cost_d(&self, s: usize, a: usize) -> f64 {
        self.cost_d[s * self.num_actions + a]
    }

    pub fn cost_n_table(&self) -> &[f64] {
        &self.cost_n
    }

    pub fn cost_d_table(&self) -> &[f64] {
        &self.cost_d
    }

    pub fn transition_table(&self) -> &[f64] {
        &self.transition
    }

    /// Draws a successor state from `P(·|s,a)` by inverse CDF.
    pub fn sample_next<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let row = self.transition_row(s, a);
        let mut acc = 0.0;
        for (next, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return next;
            }
        }
        // u landed in the rounding gap at the top; pick the last state with mass.
        row.iter().rposition(|p| *p > 0.0).unwrap_or(row.len() - 1)
    }

    fn check_policy(&self, policy: &[usize]) -> Result<(), MdpError> {
        if policy.len() != self.num_states {
            return Err(MdpError::PolicyLength {
                expected: self.num_states,
                got: policy.len(),
            });
        }
        if let Some(&a) = policy.iter().find(|&&a| a >= self.num_actions) {
            return Err(MdpError::ActionOutOfRange {
                action: a,
                num_actions: self.num_actions,
            });
        }
        Ok(())
    }

    /// Exact discounted value vectors `(N^π, D^π)` over all states.
    pub fn policy_values(&self, policy: &[usize]) -> Result<(Vec<f64>, Vec<f64>), MdpError> {
        self.check_policy(policy)?;
        let ns = self.num_states;
        let mut system = DMatrix::<f64>::identity(ns, ns);
        let mut rhs = DMatrix::<f64>::zeros(ns, 2);
        for s in 0..ns {
            let a = policy[s];
            for (next, p) in self.transition_row(s, a).iter().enumerate() {
                system[(s, next)] -= self.discount * p;
            }
            rhs[(s, 0)] = self.cost_n(s, a);
            rhs[(s, 1)] = self.cost_d(s, a);
        }
        let lu = system.clone().lu();
        let mut sol = lu.solve(&rhs).ok_or(MdpError::Singular)?;
        // One round of iterative refinement brings the residual to ~1e-15.
        let residual = &rhs - &system * &sol;
        if let Some(correction) = lu.solve(&residual) {
            sol += correction;
        }
        let n = sol.column(0).iter().copied().collect();
        let d = sol.column(1).iter().copied().collect();
        Ok((n, d))
    }

    /// One-step lookahead `c(s,a) + δ Σ P(s'|s,a) v(s')` for a value vector.
    pub fn backup(&self, costs: &[f64], values: &[f64], s: usize, a: usize) -> f64 {
        let future: f64 = self
            .transition_row(s, a)
            .iter()
            .zip(values)
            .map(|(p, v)| p * v)
            .sum();
        costs[s * self.num_actions + a] + self.discount * future
    }
}

fn check_len(table: &'static str, expected: usize, got: usize) -> Result<(), MdpError> {
    if expected == got {
        Ok(())
    } else {
        Err(MdpError::Shape {
            table,
            expected,
            got,
        })
    }
}

/// Discounted numerator and denominator of a policy from a start state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyValue {
    pub n_value: f64,
    pub d_value: f64,
    pub ratio: f64,
}

/// Solves the linear fixed point for `policy` and reports the quotient at `s0`.
pub fn evaluate_policy(
    mdp: &FractionalMdp,
    policy: &[usize],
    s0: usize,
) -> Result<PolicyValue, MdpError> {
    if s0 >= mdp.num_states {
        return Err(MdpError::StateOutOfRange {
            state: s0,
            num_states: mdp.num_states,
        });
    }
    let (n, d) = mdp.policy_values(policy)?;
    Ok(PolicyValue {
        n_value: n[s0],
        d_value: d[s0],
        ratio: n[s0] / d[s0],
    })
}

/// Q, N and D tables solved at a fixed quotient coefficient.
///
/// `q[z] = n[z] - gamma * d[z]` holds to rounding for every `z = s*A + a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub num_states: usize,
    pub num_actions: usize,
    pub q: Vec<f64>,
    pub n: Vec<f64>,
    pub d: Vec<f64>,
    pub gamma: f64,
}

impl QTable {
    pub fn q(&self, s: usize, a: usize) -> f64 {
        self.q[s * self.num_actions + a]
    }

    pub fn n(&self, s: usize, a: usize) -> f64 {
        self.n[s * self.num_actions + a]
    }

    pub fn d(&self, s: usize, a: usize) -> f64 {
        self.d[s * self.num_actions + a]
    }

    fn row(&self, s: usize) -> &[f64] {
        &self.q[s * self.num_actions..(s + 1) * self.num_actions]
    }

    /// Lowest-index minimizer of `Q(s, ·)`.
    pub fn greedy_action(&self, s: usize) -> usize {
        argmin(self.row(s))
    }

    pub fn greedy_policy(&self) -> Policy {
        (0..self.num_states).map(|s| self.greedy_action(s)).collect()
    }

    pub fn min_q(&self, s: usize) -> f64 {
        self.q(s, self.greedy_action(s))
    }

    /// Every action whose Q-value is within `tol` of the row minimum.
    pub fn greedy_set(&self, s: usize, tol: f64) -> Vec<usize> {
        let row = self.row(s);
        let best = row[argmin(row)];
        row.iter()
            .enumerate()
            .filter(|(_, &v)| v <= best + tol)
            .map(|(a, _)| a)
            .collect()
    }
}

/// Lowest-index minimizer; values within a relative `1e-12` count as ties.
pub fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        let slack = TIE_TOL * values[best].abs().max(1.0);
        if v < values[best] - slack {
            best = i;
        }
    }
    best
}

/// Solves the classical MDP with immediate cost `c_N - γ c_D`.
///
/// Value iteration runs until the sup-norm Bellman residual is at most
/// `tol (1-δ) / (2δ)`; the greedy policy is then polished by exact policy
/// iteration so the reported tables are the exact `(N, D)` of an optimal
/// policy.
pub fn solve_given_gamma(mdp: &FractionalMdp, gamma: f64, tol: f64) -> Result<QTable, MdpError> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(MdpError::Tolerance(tol));
    }
    let ns = mdp.num_states;
    let na = mdp.num_actions;
    let delta = mdp.discount;
    let cost: Vec<f64> = mdp
        .cost_n
        .iter()
        .zip(&mdp.cost_d)
        .map(|(n, d)| n - gamma * d)
        .collect();
    let threshold = tol * (1.0 - delta) / (2.0 * delta);

    let mut v = vec![0.0; ns];
    let mut q = vec![0.0; ns * na];
    loop {
        for s in 0..ns {
            for a in 0..na {
                q[s * na + a] = mdp.backup(&cost, &v, s, a);
            }
        }
        let mut residual = 0.0f64;
        for s in 0..ns {
            let best = q[s * na..(s + 1) * na]
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            residual = residual.max((best - v[s]).abs());
            v[s] = best;
        }
        if residual <= threshold {
            break;
        }
    }

    let mut policy: Policy = (0..ns).map(|s| argmin(&q[s * na..(s + 1) * na])).collect();
    let mut rounds = 0;
    let (n_v, d_v) = loop {
        let (n_v, d_v) = mdp.policy_values(&policy)?;
        let values: Vec<f64> = n_v.iter().zip(&d_v).map(|(n, d)| n - gamma * d).collect();
        let improved: Policy = (0..ns)
            .map(|s| {
                let row: Vec<f64> = (0..na).map(|a| mdp.backup(&cost, &values, s, a)).collect();
                let candidate = argmin(&row);
                let slack = TIE_TOL * row[policy[s]].abs().max(1.0);
                // Only switch on strict improvement so policy iteration terminates.
                if row[candidate] < row[policy[s]] - slack {
                    candidate
                } else {
                    policy[s]
                }
            })
            .collect();
        rounds += 1;
        if improved == policy || rounds > 10 * ns + 10 {
            break (n_v, d_v);
        }
        policy = improved;
    };

    let mut n = vec![0.0; ns * na];
    let mut d = vec![0.0; ns * na];
    for s in 0..ns {
        for a in 0..na {
            let z = s * na + a;
            n[z] = mdp.backup(&mdp.cost_n, &n_v, s, a);
            d[z] = mdp.backup(&mdp.cost_d, &d_v, s, a);
            q[z] = n[z] - gamma * d[z];
        }
    }
    Ok(QTable {
        num_states: ns,
        num_actions: na,
        q,
        n,
        d,
        gamma,
    })
}

/// Outcome of a fractional solve: the optimal ratio and a policy attaining it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalSolution {
    pub gamma_star: f64,
    pub policy: Policy,
    /// Quotient iterates visited, starting with the initial coefficient.
    pub iterates: Vec<f64>,
}

/// Dinkelbach's method with exact inner solves.
///
/// Starts from the ratio of the all-first-action policy, which upper-bounds
/// the optimum, and stops once `|min_a Q_γ(s0, a)| <= tol`.
pub fn dinkelbach_exact(
    mdp: &FractionalMdp,
    tol: f64,
    max_iter: usize,
) -> Result<FractionalSolution, MdpError> {
    if !(tol > 0.0) {
        return Err(MdpError::Tolerance(tol));
    }
    let s0 = mdp.initial_state;
    let mut gamma = evaluate_policy(mdp, &vec![0; mdp.num_states], s0)?.ratio;
    let mut iterates = vec![gamma];
    let inner_tol = (tol * 1e-3).max(1e-13);
    for _ in 0..max_iter {
        let table = solve_given_gamma(mdp, gamma, inner_tol)?;
        let a = table.greedy_action(s0);
        if table.q(s0, a).abs() <= tol {
            return Ok(FractionalSolution {
                gamma_star: gamma,
                policy: table.greedy_policy(),
                iterates,
            });
        }
        gamma = table.n(s0, a) / table.d(s0, a);
        iterates.push(gamma);
    }
    Err(MdpError::NoConvergence {
        iterations: max_iter,
        last_gamma: gamma,
        trace: iterates,
    })
}

/// Number of deterministic stationary policies, saturating at `u64::MAX`.
pub fn policy_count(mdp: &FractionalMdp) -> u64 {
    let mut count: u64 = 1;
    for _ in 0..mdp.num_states {
        count = count.saturating_mul(mdp.num_actions as u64);
    }
    count
}

/// Visits every deterministic policy in lexicographic order.
pub fn for_each_policy<F>(mdp: &FractionalMdp, mut visit: F) -> Result<(), MdpError>
where
    F: FnMut(&[usize]) -> Result<(), MdpError>,
{
    let total = policy_count(mdp);
    if total > MAX_ENUMERATED_POLICIES {
        return Err(MdpError::TooLarge {
            policies: total,
            limit: MAX_ENUMERATED_POLICIES,
        });
    }
    let mut policy = vec![0usize; mdp.num_states];
    loop {
        visit(&policy)?;
        // odometer increment, last state fastest
        let mut pos = mdp.num_states;
        loop {
            if pos == 0 {
                return Ok(());
            }
            pos -= 1;
            policy[pos] += 1;
            if policy[pos] < mdp.num_actions {
                break;
            }
            policy[pos] = 0;
        }
    }
}

/// Brute-force ground truth: evaluates every deterministic stationary policy.
pub fn enumerate_oracle(mdp: &FractionalMdp) -> Result<FractionalSolution, MdpError> {
    let s0 = mdp.initial_state;
    let mut best: Option<(f64, Policy)> = None;
    for_each_policy(mdp, |policy| {
        let value = evaluate_policy(mdp, policy, s0)?;
        // Lexicographic order means the first strict minimum wins ties.
        if best.as_ref().is_none_or(|(r, _)| value.ratio < *r) {
            best = Some((value.ratio, policy.to_vec()));
        }
        Ok(())
    })?;
    let (gamma_star, policy) = best.expect("at least one policy");
    Ok(FractionalSolution {
        gamma_star,
        policy,
        iterates: vec![gamma_star],
    })
}

/// States reachable from `s0` with positive probability under `policy`.
pub fn reachable_states(mdp: &FractionalMdp, policy: &[usize], s0: usize) -> Vec<usize> {
    let mut seen = vec![false; mdp.num_states];
    let mut stack = vec![s0];
    seen[s0] = true;
    while let Some(s) = stack.pop() {
        for (next, p) in mdp.transition_row(s, policy[s]).iter().enumerate() {
            if *p > 0.0 && !seen[next] {
                seen[next] = true;
                stack.push(next);
            }
        }
    }
    (0..mdp.num_states).filter(|&s| seen[s]).collect()
}
