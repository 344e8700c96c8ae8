//! Non-learning reference policies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{Action, DecisionKind, DecisionPoint, Observation, SchedulingPolicy, SimConfig};

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("fixed wait {z} outside [0, {z_max}]")]
    WaitOutOfRange { z: f64, z_max: f64 },
    #[error("unknown baseline `{0}`")]
    Unknown(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Uniform wait in `[0, Z̄]` and uniform route over `{0, 1..N}`.
    Random,
    ZeroWaitRandomRoute,
    /// Sanity baseline: zero wait, least-loaded edge.
    ZeroWaitShortestQueue,
    AlwaysLocalZeroWait,
    FixedWait(f64),
}

impl BaselineKind {
    pub fn name(&self) -> String {
        match self {
            BaselineKind::Random => "random".into(),
            BaselineKind::ZeroWaitRandomRoute => "zero_wait_random_route".into(),
            BaselineKind::ZeroWaitShortestQueue => "zero_wait_shortest_queue".into(),
            BaselineKind::AlwaysLocalZeroWait => "always_local_zero_wait".into(),
            BaselineKind::FixedWait(z) => format!("fixed_wait({z})"),
        }
    }

    /// Parses the names produced by [`BaselineKind::name`].
    pub fn parse(text: &str) -> Result<Self, BaselineError> {
        let text = text.trim();
        Ok(match text {
            "random" => BaselineKind::Random,
            "zero_wait_random_route" => BaselineKind::ZeroWaitRandomRoute,
            "zero_wait_shortest_queue" => BaselineKind::ZeroWaitShortestQueue,
            "always_local_zero_wait" => BaselineKind::AlwaysLocalZeroWait,
            _ => text
                .strip_prefix("fixed_wait(")
                .and_then(|rest| rest.strip_suffix(')'))
                .and_then(|z| z.trim().parse().ok())
                .map(BaselineKind::FixedWait)
                .ok_or_else(|| BaselineError::Unknown(text.to_string()))?,
        })
    }

    pub fn validate(&self, space: ActionSpace) -> Result<(), BaselineError> {
        match *self {
            BaselineKind::FixedWait(z) if !(0.0..=space.z_max).contains(&z) => {
                Err(BaselineError::WaitOutOfRange { z, z_max: space.z_max })
            }
            _ => Ok(()),
        }
    }
}

/// Waiting times lie in `[0, z_max]`, routes in `{0, 1..num_edges}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionSpace {
    pub z_max: f64,
    pub num_edges: usize,
}

impl ActionSpace {
    pub fn of(config: &SimConfig) -> Self {
        Self {
            z_max: config.z_max,
            num_edges: config.num_edges,
        }
    }
}

/// Lowest-index edge with the fewest tasks, 1-indexed.
pub fn shortest_queue(queues: &[usize]) -> usize {
    queues
        .iter()
        .enumerate()
        .min_by_key(|&(i, q)| (*q, i))
        .map_or(0, |(i, _)| i + 1)
}

pub fn act<R: Rng + ?Sized>(
    kind: BaselineKind,
    space: ActionSpace,
    decision: &DecisionPoint,
    rng: &mut R,
) -> Action {
    match (&decision.observation, kind) {
        (Observation::PrevDelay(_), BaselineKind::Random) => Action::Wait(rng.gen_range(0.0..=space.z_max)),
        (Observation::PrevDelay(_), BaselineKind::FixedWait(z)) => Action::Wait(z),
        (Observation::PrevDelay(_), _) => Action::Wait(0.0),
        (Observation::QueueLengths(_), BaselineKind::Random | BaselineKind::ZeroWaitRandomRoute) => {
            Action::Route(rng.gen_range(0..=space.num_edges))
        }
        (Observation::QueueLengths(q), BaselineKind::ZeroWaitShortestQueue) => Action::Route(shortest_queue(q)),
        (Observation::QueueLengths(_), BaselineKind::AlwaysLocalZeroWait) => Action::Route(0),
        // fixed_wait pins only the updating decision and routes uniformly
        (Observation::QueueLengths(_), BaselineKind::FixedWait(_)) => {
            Action::Route(rng.gen_range(0..=space.num_edges))
        }
    }
}

/// A baseline bound to one device's random stream.
#[derive(Debug, Clone)]
pub struct BaselinePolicy {
    pub kind: BaselineKind,
    pub space: ActionSpace,
    rng: ChaCha8Rng,
}

impl BaselinePolicy {
    pub fn new(kind: BaselineKind, space: ActionSpace, seed: u64, device: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6261_7365_6c69_6e65);
        rng.set_stream(device as u64);
        Self { kind, space, rng }
    }
}

impl SchedulingPolicy for BaselinePolicy {
    fn decide(&mut self, decision: &DecisionPoint) -> Action {
        act(self.kind, self.space, decision, &mut self.rng)
    }
}

/// One boxed baseline per device of `config`.
pub fn policies_for(
    config: &SimConfig,
    kinds: &[BaselineKind],
) -> Result<Vec<Box<dyn SchedulingPolicy>>, BaselineError> {
    let space = ActionSpace::of(config);
    (0..config.num_devices)
        .map(|d| {
            let kind = kinds[d % kinds.len()];
            kind.validate(space)?;
            Ok(Box::new(BaselinePolicy::new(kind, space, config.seed, d)) as Box<dyn SchedulingPolicy>)
        })
        .collect()
}

pub fn is_well_formed(action: Action, decision: &DecisionPoint, space: ActionSpace) -> bool {
    match (decision.kind(), action) {
        (DecisionKind::Updating, Action::Wait(z)) => (0.0..=space.z_max).contains(&z),
        (DecisionKind::Offloading, Action::Route(x)) => x <= space.num_edges,
        _ => false,
    }
}
