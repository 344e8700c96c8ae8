//! Acceptance checks, one line per criterion.
//!
//! Every check prints `PASS` or `FAIL` with the measured value and the
//! tolerance it was held to. The process exits with status 3 if any check
//! fails.

use std::net::TcpListener;
use std::process::ExitCode;
use std::thread;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use agemec::aoi::{integrate_age, trapezoid_area};
use agemec::baselines::{ActionSpace, BaselineKind, BaselinePolicy};
use agemec::bridge::{decode, encode, serve_tcp, Client, Message, Session, SessionPlan};
use agemec::fql::{
    inner_steps_bound, run_fql, run_fql_with, ControlledErrorInner, ExactInner, OuterConfig, StopRule,
};
use agemec::harness::convergence_report;
use agemec::mdp::{enumerate_oracle, evaluate_policy, for_each_policy, reachable_states, solve_given_gamma};
use agemec::mdp::FractionalMdp;
use agemec::sim::{
    check_invariants, run_with_policies, Action, DecisionPoint, Horizon, Outcome, SchedulingPolicy, SimConfig,
    Simulation,
};

const DISCOUNT: f64 = 0.9;
const SAMPLED_TOL: f64 = 5e-2;
const EXACT_TOL: f64 = 1e-3;
const FQL_TIME_LIMIT: Duration = Duration::from_secs(120);
const RATE_BAND: f64 = 0.05;
const ERROR_FRACTION: f64 = 0.9;
const TELESCOPE_REL: f64 = 1e-9;
const ANALYTIC_AOI: f64 = 7.128;
const ANALYTIC_REL: f64 = 0.02;

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

/// Sizes cycle through |S| in 2..=6 and |A| in 2..=4.
fn random_mdp(seed: u64) -> FractionalMdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ns = 2 + (seed % 5) as usize;
    let na = 2 + (seed % 3) as usize;
    FractionalMdp::random(&mut rng, ns, na, DISCOUNT, (0.0, 1.0), (0.2, 1.0)).unwrap()
}

/// Ratio of the all-first-action policy, an upper bound on `γ*`.
fn upper_start(mdp: &FractionalMdp) -> f64 {
    evaluate_policy(mdp, &vec![0; mdp.num_states()], mdp.initial_state()).unwrap().ratio
}

fn fql_vs_oracle() -> Vec<Check> {
    let start = Instant::now();
    let (mut sampled_worst, mut exact_worst) = (0.0f64, 0.0f64);
    for seed in 0..20 {
        let mdp = random_mdp(seed);
        let star = enumerate_oracle(&mdp).unwrap().gamma_star;
        let g1 = upper_start(&mdp);
        let sampled = run_fql(&mdp, g1, StopRule::bound_steps(0.5, 20_000), 6, seed).unwrap();
        sampled_worst = sampled_worst.max((sampled.gamma_final - star).abs());
        let exact = run_fql_with(
            &mut ExactInner { mdp: &mdp, tol: 1e-12 },
            g1,
            OuterConfig {
                episodes: 20,
                tolerance: 1e-12,
            },
        )
        .unwrap();
        exact_worst = exact_worst.max((exact.gamma_final - star).abs());
    }
    let elapsed = start.elapsed();
    vec![
        check(
            "fql_vs_oracle_sampled",
            sampled_worst <= SAMPLED_TOL,
            format!("max |γ_final − γ*| = {sampled_worst:.3e} over 20 MDPs (≤ {SAMPLED_TOL:e})"),
        ),
        check(
            "fql_vs_oracle_exact_inner",
            exact_worst <= EXACT_TOL,
            format!("max |γ_final − γ*| = {exact_worst:.3e} over 20 MDPs (≤ {EXACT_TOL:e})"),
        ),
        check(
            "fql_vs_oracle_runtime",
            elapsed <= FQL_TIME_LIMIT,
            format!("{:.1} s (≤ {} s)", elapsed.as_secs_f64(), FQL_TIME_LIMIT.as_secs()),
        ),
    ]
}

fn linear_rate() -> Vec<Check> {
    let mdps: Vec<FractionalMdp> = (0..10).map(random_mdp).collect();
    [(0.3, "linear_rate_alpha_0.3"), (0.5, "linear_rate_alpha_0.5"), (0.9, "linear_rate_alpha_0.9")]
        .into_iter()
        .map(|(alpha, name)| {
            let mut failures = Vec::new();
            let mut tails = Vec::new();
            for (i, mdp) in mdps.iter().enumerate() {
                let star = enumerate_oracle(mdp).unwrap().gamma_star;
                let mut inner = ControlledErrorInner {
                    mdp,
                    alpha,
                    fraction: ERROR_FRACTION,
                };
                let outer = OuterConfig {
                    episodes: 80,
                    tolerance: 0.0,
                };
                let trace = run_fql_with(&mut inner, 0.0, outer).unwrap();
                let report = convergence_report(&trace, Some(star), Some(alpha));
                if let Some(t) = report.tail_mean {
                    tails.push(t);
                }
                if !report.pass {
                    failures.push(format!("mdp {i}: {}", report.reasons.join(", ")));
                }
            }
            let spread = tails.iter().fold((f64::MAX, f64::MIN), |(lo, hi), t| (lo.min(*t), hi.max(*t)));
            let mut detail = format!(
                "tail-mean ratio in [{:.4}, {:.4}] over {} MDPs (α ± {RATE_BAND}, all ratios in (0,1))",
                spread.0,
                spread.1,
                mdps.len()
            );
            if let Some(first) = failures.first() {
                detail.push_str(&format!("; {first}"));
            }
            check(name, failures.is_empty(), detail)
        })
        .collect()
}

fn step_bound() -> Check {
    let a = inner_steps_bound(20, 10, 0.1, 0.5).unwrap();
    let b = inner_steps_bound(20, 10, 0.1, 0.9).unwrap();
    // the budget is a pure function of its arguments; also check what a run records
    let mdp = random_mdp(3);
    let z = mdp.num_states() * mdp.num_actions();
    let budget = inner_steps_bound(z, 8, 0.1, 0.5).unwrap();
    let trace = run_fql(&mdp, upper_start(&mdp), StopRule::bound_steps(0.5, budget), 8, 1).unwrap();
    let constant = trace.episodes.iter().all(|e| e.inner.steps == budget);
    check(
        "step_bound",
        a == 173 && b == 54 && constant,
        format!("bound(α=0.5) = {a}, bound(α=0.9) = {b} (173, 54); budget {budget} on all 8 episodes: {constant}"),
    )
}

/// Actions used at `s` by oracle-optimal policies under which `s` is reachable.
fn optimal_action_sets(mdp: &FractionalMdp, star: f64, tol: f64) -> Vec<Vec<usize>> {
    let s0 = mdp.initial_state();
    let mut sets = vec![Vec::new(); mdp.num_states()];
    for_each_policy(mdp, |p| {
        if evaluate_policy(mdp, p, s0)?.ratio <= star + tol {
            for s in reachable_states(mdp, p, s0) {
                if !sets[s].contains(&p[s]) {
                    sets[s].push(p[s]);
                }
            }
        }
        Ok(())
    })
    .unwrap();
    for set in &mut sets {
        set.sort_unstable();
    }
    sets
}

fn lemma_fixtures() -> Vec<FractionalMdp> {
    let mut out = vec![
        // two actions, the cheaper-per-unit one wins
        FractionalMdp::new(1, 2, vec![1.0, 1.0], vec![2.0, 3.0], vec![1.0, 2.0], 0.5, 0).unwrap(),
        // duplicated action: both must appear in the greedy set
        FractionalMdp::new(1, 3, vec![1.0; 3], vec![1.0, 1.0, 2.0], vec![1.0, 1.0, 1.0], 0.9, 0).unwrap(),
        // absorbing second state reachable only through action 1
        FractionalMdp::new(
            2,
            2,
            vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0],
            vec![0.5, 0.4, 0.1, 0.9],
            vec![1.0, 1.0, 1.0, 1.0],
            0.9,
            0,
        )
        .unwrap(),
    ];
    for seed in 0..30u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let ns = 1 + (seed % 3) as usize;
        let na = 1 + ((seed / 3) % 3) as usize;
        out.push(FractionalMdp::random(&mut rng, ns, na, DISCOUNT, (0.0, 1.0), (0.2, 1.0)).unwrap());
    }
    out
}

fn lemma_equivalence() -> Check {
    let fixtures = lemma_fixtures();
    let mut mismatches = Vec::new();
    for (i, mdp) in fixtures.iter().enumerate() {
        let oracle = enumerate_oracle(mdp).unwrap();
        let star = oracle.gamma_star;
        let tol = 1e-9 * star.abs().max(1.0);
        let table = solve_given_gamma(mdp, star, 1e-13).unwrap();
        let expected = optimal_action_sets(mdp, star, tol);
        for s in reachable_states(mdp, &oracle.policy, mdp.initial_state()) {
            let greedy = table.greedy_set(s, 1e-8);
            if greedy != expected[s] || !greedy.contains(&oracle.policy[s]) {
                mismatches.push(format!("fixture {i} state {s}: greedy {greedy:?} vs oracle {:?}", expected[s]));
            }
        }
    }
    check(
        "lemma_equivalence",
        mismatches.is_empty(),
        match mismatches.first() {
            None => format!("{} fixtures, greedy sets match at every reachable state", fixtures.len()),
            Some(m) => format!("{} mismatches; {m}", mismatches.len()),
        },
    )
}

fn no_drop_config(devices: usize, tasks: u64, seed: u64) -> SimConfig {
    SimConfig {
        num_devices: devices,
        drop_coefficient: f64::INFINITY,
        horizon: Horizon::Tasks(tasks),
        seed,
        ..SimConfig::default()
    }
}

#[allow(clippy::vec_box)]
fn baseline_policies(config: &SimConfig, kind: BaselineKind, seed: u64) -> Vec<Box<BaselinePolicy>> {
    let space = ActionSpace::of(config);
    (0..config.num_devices).map(|d| Box::new(BaselinePolicy::new(kind, space, seed, d))).collect()
}

/// `½c₁² − ½Y₁² + Σ A_k + ½Y_K² + Y_K (T − c_K) + ½(T − c_K)²`, summed
/// directly from the task records.
fn trapezoid_sum(log: &agemec::sim::EpisodeLog, device: usize) -> f64 {
    let tasks: Vec<_> = log.device_tasks(device).collect();
    let done: Vec<(f64, f64, f64)> = tasks
        .iter()
        .filter_map(|t| match t.outcome {
            Outcome::Completed { time, delay } => Some((time, delay, t.wait_before)),
            _ => None,
        })
        .collect();
    let (c1, y1, _) = done[0];
    let mut total = 0.5 * c1 * c1 - 0.5 * y1 * y1;
    for w in done.windows(2) {
        total += trapezoid_area(w[0].1, w[1].2, w[1].1).unwrap();
    }
    let (ck, yk, _) = done[done.len() - 1];
    let tail = log.end_time - ck;
    total + 0.5 * yk * yk + yk * tail + 0.5 * tail * tail
}

fn telescoping() -> Check {
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let config = no_drop_config(1, 10_000, seed);
        let mut policies = baseline_policies(&config, BaselineKind::Random, seed);
        let log = run_with_policies(Simulation::build(config).unwrap(), &mut policies).unwrap();
        let exact = integrate_age(&log, 0);
        let rel = (trapezoid_sum(&log, 0) - exact).abs() / exact;
        worst = worst.max(rel);
    }
    check(
        "aoi_telescoping",
        worst <= TELESCOPE_REL,
        format!("max relative gap {worst:.3e} over 100 traces of 10^4 tasks (≤ {TELESCOPE_REL:e})"),
    )
}

fn analytic_aoi() -> Check {
    let config = no_drop_config(1, 100_000, 7);
    let mut policies = baseline_policies(&config, BaselineKind::AlwaysLocalZeroWait, 7);
    let log = run_with_policies(Simulation::build(config).unwrap(), &mut policies).unwrap();
    let avg = integrate_age(&log, 0) / log.end_time;
    let rel = (avg - ANALYTIC_AOI).abs() / ANALYTIC_AOI;
    check(
        "analytic_aoi",
        rel <= ANALYTIC_REL,
        format!("average AoI {avg:.4} s vs {ANALYTIC_AOI} s, relative {rel:.4} (≤ {ANALYTIC_REL})"),
    )
}

fn soak() -> Check {
    let run = || {
        let config = SimConfig {
            horizon: Horizon::Tasks(10_000),
            seed: 2024,
            ..SimConfig::default()
        };
        let mut policies = baseline_policies(&config, BaselineKind::Random, 2024);
        run_with_policies(Simulation::build(config).unwrap(), &mut policies).unwrap()
    };
    let first = run();
    let violations = check_invariants(&first, true);
    let tasks = first.tasks.len();
    let same_hash = run().hash() == first.hash();
    check(
        "simulator_soak",
        violations.is_empty() && same_hash && tasks == 20 * 10_000,
        format!(
            "{tasks} tasks on 20 devices / 2 edges, {} violations, repeat hash equal: {same_hash}",
            violations.len()
        ),
    )
}

fn schema_samples() -> Vec<String> {
    let lines = [
        r#"{"type":"hello","seq":0,"device":0,"episode":0,"protocol":1,"devices":[0,2]}"#,
        r#"{"type":"hello","seq":0,"device":0,"episode":0,"protocol":1,"devices":[0],"session":{"num_devices":1,"num_edges":2,"z_max":5.0,"drop_time":5.346,"episodes":2,"steps":3,"cost_mode":"ratio","drop_mode":"skip"}}"#,
        r#"{"type":"decision","seq":4,"device":1,"episode":2,"token":9,"kind":"offloading","task":7,"time":1.25,"state":{"queue_lengths":[1,0]}}"#,
        r#"{"type":"action","seq":5,"device":1,"episode":2,"token":9,"x":2}"#,
        r#"{"type":"action","seq":6,"device":1,"episode":2,"token":10,"z":0.1}"#,
        r#"{"type":"experience","seq":7,"device":1,"episode":2,"kind":"updating","task":7,"state":{"prev_delay":0.3},"action":{"wait":0.1},"cost":-0.125,"next_state":{"prev_delay":5.346},"gamma":0.75}"#,
        r#"{"type":"gamma_update","seq":8,"device":1,"episode":2,"gamma":0.7,"numerator":7.0,"denominator":10.0,"records":4,"carried":false}"#,
        r#"{"type":"episode_begin","seq":9,"device":1,"episode":3,"gamma":0.7}"#,
        r#"{"type":"episode_end","seq":10,"device":1,"episode":3,"avg_aoi":3.5,"tasks":3,"drops":1}"#,
        r#"{"type":"error","seq":11,"device":1,"episode":3,"code":"stale_token","message":"token 3 for device 1 is not pending"}"#,
    ];
    lines.iter().map(|s| s.to_string()).collect()
}

fn bridge_loopback() -> Check {
    let config = SimConfig {
        num_devices: 3,
        seed: 31,
        ..SimConfig::default()
    };
    let plan = SessionPlan {
        episodes: 4,
        steps: 50,
        ..SessionPlan::default()
    };
    let session = Session::new(config.clone(), plan, vec![None, None, None]).unwrap();
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let server = thread::spawn(move || {
        let mut session = session;
        serve_tcp(&mut session, listener).map(|_| session)
    });
    let mut remote = baseline_policies(&config, BaselineKind::Random, 5);
    let transcript = Client::connect(addr.as_str()).unwrap().run(vec![], |d| {
        let dp = DecisionPoint {
            device: d.device,
            time: d.time,
            task: d.task,
            observation: d.state.clone(),
        };
        match remote[d.device].decide(&dp) {
            Action::Wait(z) => (Some(z), None),
            Action::Route(x) => (None, Some(x)),
        }
    });
    let session = server.join().unwrap();
    let (transcript, session) = match (transcript, session) {
        (Ok(t), Ok(s)) => (t, s),
        (t, s) => {
            return check(
                "bridge_loopback",
                false,
                format!("session failed: client {:?}, server {:?}", t.err(), s.err()),
            )
        }
    };

    let mut local_config = config;
    local_config.horizon = Horizon::Tasks(plan.episodes as u64 * plan.steps);
    let mut local = baseline_policies(&local_config, BaselineKind::Random, 5);
    let log = run_with_policies(Simulation::build(local_config).unwrap(), &mut local).unwrap();
    let logs_equal = session.simulation().log().canonical_bytes() == log.canonical_bytes();

    let mut schema_failures = 0;
    let mut samples = schema_samples();
    samples.extend(transcript.wire.iter().map(|(_, m)| String::from_utf8(encode(m)).unwrap()));
    let mut kinds = std::collections::BTreeSet::new();
    for line in &samples {
        let ok = decode(line.as_bytes())
            .map(|m: Message| {
                kinds.insert(m.type_name());
                String::from_utf8(encode(&m)).unwrap().trim_end() == line.trim_end()
            })
            .unwrap_or(false);
        if !ok {
            schema_failures += 1;
        }
    }
    check(
        "bridge_loopback",
        logs_equal && schema_failures == 0 && kinds.len() == 8,
        format!(
            "{} messages, logs equal: {logs_equal}; {} lines round-tripped over {} message types, {schema_failures} failures",
            transcript.wire.len(),
            samples.len(),
            kinds.len()
        ),
    )
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut checks = fql_vs_oracle();
    checks.extend(linear_rate());
    checks.push(step_bound());
    checks.push(lemma_equivalence());
    checks.push(telescoping());
    checks.push(analytic_aoi());
    checks.push(soak());
    checks.push(bridge_loopback());

    println!();
    for c in &checks {
        println!("{} {:<28} {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    println!(
        "\nacceptance: {} passed, {failed} failed in {:.1} s",
        checks.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    }
}
