//! WebAssembly bindings for the static page in `www/`.
//!
//! Every export returns flat `Float64Array`s so the page can draw them
//! without a serialization layer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

use agemec::aoi::integrate_age;
use agemec::fql::{run_fql, run_fql_with, ControlledErrorInner, OuterConfig, StopRule};
use agemec::mdp::{enumerate_oracle, FractionalMdp};
use agemec::sim::{
    run_with_policies, Action, DecisionPoint, EpisodeLog, Horizon, Observation, Outcome, ServiceDistribution,
    SimConfig, Simulation,
};

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// One device with a fixed wait and a fixed route.
fn single_device(
    seed: u64,
    tasks: u32,
    wait: f64,
    route: usize,
    drop_coefficient: f64,
    sigma: Option<f64>,
) -> Result<EpisodeLog, String> {
    let mut config = SimConfig {
        num_devices: 1,
        drop_coefficient,
        horizon: Horizon::Tasks(tasks as u64),
        seed,
        ..SimConfig::default()
    };
    config.z_max = config.z_max.max(wait);
    if let Some(s) = sigma {
        config.service_distribution = ServiceDistribution::Lognormal;
        config.lognormal_sigma = s;
    }
    let sim = Simulation::build(config).map_err(|e| e.to_string())?;
    let mut policy = [Box::new(move |dp: &DecisionPoint| match dp.observation {
        Observation::PrevDelay(_) => Action::Wait(wait),
        Observation::QueueLengths(_) => Action::Route(route),
    })];
    run_with_policies(sim, &mut policy).map_err(|e| e.to_string())
}

/// Corner points `(t, Δ(t))` of the age curve, including both sides of
/// every reset, and the time average.
pub fn sawtooth_points(log: &EpisodeLog) -> (Vec<f64>, f64) {
    let mut pts = vec![0.0, 0.0];
    let mut basis = 0.0;
    for t in log.device_tasks(0) {
        if let Outcome::Completed { time, .. } = t.outcome {
            pts.extend([time, time - basis, time, time - t.gen_time]);
            basis = t.gen_time;
        }
    }
    pts.extend([log.end_time, log.end_time - basis]);
    let avg = if log.end_time > 0.0 {
        integrate_age(log, 0) / log.end_time
    } else {
        0.0
    };
    (pts, avg)
}

#[wasm_bindgen]
pub struct Sawtooth {
    points: Vec<f64>,
    average: f64,
    drops: u32,
}

#[wasm_bindgen]
impl Sawtooth {
    /// Interleaved `t0, Δ0, t1, Δ1, ...`.
    pub fn points(&self) -> Vec<f64> {
        self.points.clone()
    }

    pub fn average(&self) -> f64 {
        self.average
    }

    pub fn drops(&self) -> u32 {
        self.drops
    }
}

/// Age of a single device over `tasks` tasks. `route` 0 computes locally,
/// 1 or 2 offloads to that edge; `drop_coefficient <= 0` disables drops.
#[wasm_bindgen]
pub fn aoi_sawtooth(seed: u64, tasks: u32, wait: f64, route: usize, drop_coefficient: f64) -> Result<Sawtooth, JsError> {
    let coefficient = if drop_coefficient > 0.0 { drop_coefficient } else { f64::INFINITY };
    let log = single_device(seed, tasks, wait, route, coefficient, None).map_err(js_err)?;
    let drops = log.tasks.iter().filter(|t| t.is_dropped()).count() as u32;
    let (points, average) = sawtooth_points(&log);
    Ok(Sawtooth { points, average, drops })
}

#[wasm_bindgen]
pub struct Convergence {
    controlled: Vec<f64>,
    sampled: Vec<f64>,
    gamma_star: f64,
}

#[wasm_bindgen]
impl Convergence {
    /// `γ_1 .. γ_final` with the inner error held at `0.9 α |Q|`.
    pub fn controlled(&self) -> Vec<f64> {
        self.controlled.clone()
    }

    /// `γ_1 .. γ_final` with sampled inner loops.
    pub fn sampled(&self) -> Vec<f64> {
        self.sampled.clone()
    }

    pub fn gamma_star(&self) -> f64 {
        self.gamma_star
    }
}

pub fn quotient_traces(seed: u64, states: usize, actions: usize, alpha: f64, episodes: usize) -> Result<Convergence, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mdp = FractionalMdp::random(&mut rng, states, actions, 0.9, (0.0, 1.0), (0.2, 1.0)).map_err(|e| e.to_string())?;
    let gamma_star = enumerate_oracle(&mdp).map_err(|e| e.to_string())?.gamma_star;
    let controlled = run_fql_with(
        &mut ControlledErrorInner {
            mdp: &mdp,
            alpha,
            fraction: 0.9,
        },
        0.0,
        OuterConfig {
            episodes,
            tolerance: 0.0,
        },
    )
    .map_err(|e| e.to_string())?
    .gammas();
    let sampled = run_fql(&mdp, 0.0, StopRule::bound_steps(alpha, 2000), episodes, seed)
        .map_err(|e| e.to_string())?
        .gammas();
    Ok(Convergence {
        controlled,
        sampled,
        gamma_star,
    })
}

/// Quotient iterates on a random fractional MDP with `states` states and
/// `actions` actions, against the exact optimum.
#[wasm_bindgen]
pub fn gamma_convergence(seed: u64, states: usize, actions: usize, alpha: f64, episodes: usize) -> Result<Convergence, JsError> {
    quotient_traces(seed, states, actions, alpha, episodes).map_err(js_err)
}

pub fn wait_curve(seed: u64, tasks: u32, z_max: f64, points: usize, sigma: f64) -> Result<Vec<f64>, String> {
    let sigma = (sigma > 0.0).then_some(sigma);
    let n = points.max(2);
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        let z = z_max * i as f64 / (n - 1) as f64;
        let log = single_device(seed, tasks, z, 0, f64::INFINITY, sigma)?;
        out.extend([z, integrate_age(&log, 0) / log.end_time]);
    }
    Ok(out)
}

/// Average age under local computing for `points` fixed waits in
/// `[0, z_max]`, as `z0, Δ0, z1, Δ1, ...`. `sigma > 0` switches service
/// times to a lognormal with that shape.
#[wasm_bindgen]
pub fn aoi_vs_wait(seed: u64, tasks: u32, z_max: f64, points: usize, sigma: f64) -> Result<Vec<f64>, JsError> {
    wait_curve(seed, tasks, z_max, points, sigma).map_err(js_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sawtooth_area_matches_average() {
        let log = single_device(3, 200, 0.5, 0, f64::INFINITY, None).unwrap();
        let (pts, avg) = sawtooth_points(&log);
        // trapezoids between consecutive corners; the vertical resets add nothing
        let area: f64 = pts
            .chunks(2)
            .collect::<Vec<_>>()
            .windows(2)
            .map(|w| 0.5 * (w[1][0] - w[0][0]) * (w[0][1] + w[1][1]))
            .sum();
        assert!((area / log.end_time - avg).abs() < 1e-9 * avg);
    }

    #[test]
    fn controlled_trace_approaches_optimum() {
        let c = quotient_traces(1, 3, 2, 0.5, 30).unwrap();
        let last = *c.controlled.last().unwrap();
        assert!((last - c.gamma_star).abs() < 1e-6);
        assert_eq!(c.sampled.len(), 31);
    }

    #[test]
    fn wait_curve_shape() {
        let curve = wait_curve(2, 500, 4.0, 5, 0.0).unwrap();
        assert_eq!(curve.len(), 10);
        assert_eq!(curve[0], 0.0);
        assert_eq!(curve[8], 4.0);
        assert!(curve.iter().skip(1).step_by(2).all(|a| *a > 0.0));
    }
}
