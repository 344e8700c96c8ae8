//! Continuous-time event simulator for devices offloading to edge nodes.
//!
//! Each device runs a generate-at-will loop: when its task resolves it picks a
//! waiting time, generates the next task after that wait, and then routes the
//! task to local processing or to one of the FIFO edge queues. A task whose
//! age-in-process reaches the drop time `Ȳ` is discarded at exactly
//! `t_gen + Ȳ`.
//!
//! The simulator is driven in lockstep: [`Simulation::next_decision`] advances
//! the event loop to the next instant where some device needs an action, and
//! refuses to advance again until that decision is answered.

mod check;
mod config;
mod log;

pub use check::{check_invariants, Violation};
pub use config::{Horizon, ServiceDistribution, SimConfig};
pub use log::{EpisodeLog, Outcome, TaskRecord, TraceEvent, TraceKind};

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("decision for device {device} is still unanswered")]
    Unanswered { device: usize },
    #[error("no pending {expected} decision for device {device}")]
    OutOfTurn { device: usize, expected: &'static str },
    #[error("route {route} outside 0..={num_edges}")]
    RouteOutOfRange { route: usize, num_edges: usize },
    #[error("waiting time is not a number")]
    NanWait,
    #[error("episode already ended")]
    Ended,
    #[error("device {device} out of range")]
    NoSuchDevice { device: usize },
    #[error("policy for device {device} returned {action:?} at {decision:?}")]
    Policy {
        device: usize,
        decision: Box<DecisionPoint>,
        action: Action,
    },
}

/// What a device observes when it must act.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observation {
    /// Delay of the previous task (`Ȳ` if it was dropped, 0 before the first).
    PrevDelay(f64),
    /// Tasks present at each edge (queued plus in service).
    QueueLengths(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    Updating,
    Offloading,
}

impl DecisionKind {
    fn as_str(self) -> &'static str {
        match self {
            DecisionKind::Updating => "updating",
            DecisionKind::Offloading => "offloading",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionPoint {
    pub device: usize,
    pub time: f64,
    /// Index of the task this decision concerns: the task about to be
    /// generated (updating) or just generated (offloading).
    pub task: u64,
    pub observation: Observation,
}

impl DecisionPoint {
    pub fn kind(&self) -> DecisionKind {
        match self.observation {
            Observation::PrevDelay(_) => DecisionKind::Updating,
            Observation::QueueLengths(_) => DecisionKind::Offloading,
        }
    }
}

/// An answer to a decision point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    /// Waiting time before generating the next task.
    Wait(f64),
    /// 0 = local, `n` = edge `n`.
    Route(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Decision(DecisionPoint),
    EpisodeEnd,
}

/// Overrides for the next offloading action's random draws. `None` fields
/// are sampled as usual.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ForcedDraws {
    pub tau_local: Option<f64>,
    pub tau_tran: Option<f64>,
    pub tau_edge: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventClass {
    // Completions sort first so a task finishing exactly at its deadline counts.
    LocalDone,
    EdgeDone,
    Arrival,
    Drop,
    Generate,
}

#[derive(Debug, Clone, Copy)]
struct Scheduled {
    time: f64,
    class: EventClass,
    seq: u64,
    /// Task slot in the log, or device id for `Generate`.
    target: usize,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.class.cmp(&self.class))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Device {
    rng: ChaCha8Rng,
    generated: u64,
    resolved: u64,
    /// Waiting time chosen for the next generation.
    next_wait: f64,
    forced: VecDeque<ForcedDraws>,
}

struct Edge {
    mean: f64,
    queue: VecDeque<usize>,
    in_service: Option<usize>,
}

impl Edge {
    fn occupancy(&self) -> usize {
        self.queue.len() + usize::from(self.in_service.is_some())
    }
}

pub struct Simulation {
    config: SimConfig,
    local_mean: f64,
    drop_time: f64,
    now: f64,
    seq: u64,
    events: BinaryHeap<Scheduled>,
    devices: Vec<Device>,
    edges: Vec<Edge>,
    ready: VecDeque<DecisionPoint>,
    pending: Option<DecisionPoint>,
    log: EpisodeLog,
    ended: bool,
    resolutions: Option<Vec<Resolution>>,
}

/// A task resolution together with the edge occupancy right after it.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    pub device: usize,
    pub task: u64,
    /// Position of the task in [`EpisodeLog::tasks`].
    pub slot: usize,
    pub time: f64,
    pub queues: Vec<usize>,
}

impl Simulation {
    pub fn build(config: SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        let local_mean = config.local_mean();
        let drop_time = config.drop_time();
        let devices = (0..config.num_devices)
            .map(|m| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(m as u64);
                Device {
                    rng,
                    generated: 0,
                    resolved: 0,
                    next_wait: 0.0,
                    forced: VecDeque::new(),
                }
            })
            .collect();
        let edges = (0..config.num_edges)
            .map(|n| Edge {
                mean: config.edge_mean(n),
                queue: VecDeque::new(),
                in_service: None,
            })
            .collect();
        let log = EpisodeLog {
            num_devices: config.num_devices,
            num_edges: config.num_edges,
            drop_time,
            ..EpisodeLog::default()
        };
        let mut sim = Self {
            config,
            local_mean,
            drop_time,
            now: 0.0,
            seq: 0,
            events: BinaryHeap::new(),
            devices,
            edges,
            ready: VecDeque::new(),
            pending: None,
            log,
            ended: false,
            resolutions: None,
        };
        for m in 0..sim.config.num_devices {
            sim.push_update_decision(m, 0.0);
        }
        Ok(sim)
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn drop_time(&self) -> f64 {
        self.drop_time
    }

    pub fn local_mean(&self) -> f64 {
        self.local_mean
    }

    pub fn edge_mean(&self, edge: usize) -> f64 {
        self.edges[edge].mean
    }

    pub fn pending(&self) -> Option<&DecisionPoint> {
        self.pending.as_ref()
    }

    pub fn log(&self) -> &EpisodeLog {
        &self.log
    }

    pub fn into_log(self) -> EpisodeLog {
        self.log
    }

    /// Starts buffering [`Resolution`]s for [`Simulation::drain_resolutions`].
    pub fn track_resolutions(&mut self) {
        self.resolutions.get_or_insert_with(Vec::new);
    }

    /// Resolutions since the last call, in simulated-time order.
    pub fn drain_resolutions(&mut self) -> Vec<Resolution> {
        self.resolutions.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Tasks present at each edge.
    pub fn queue_lengths(&self) -> Vec<usize> {
        self.queue_snapshot()
    }

    /// Queues draw overrides for a device's upcoming offloading actions.
    pub fn force_draws(&mut self, device: usize, draws: ForcedDraws) -> Result<(), SimError> {
        self.devices
            .get_mut(device)
            .ok_or(SimError::NoSuchDevice { device })?
            .forced
            .push_back(draws);
        Ok(())
    }

    /// Advances to the next decision epoch.
    pub fn next_decision(&mut self) -> Result<Step, SimError> {
        if let Some(p) = &self.pending {
            return Err(SimError::Unanswered { device: p.device });
        }
        if self.ended {
            return Err(SimError::Ended);
        }
        loop {
            if let Some(dp) = self.ready.pop_front() {
                self.trace(
                    match dp.kind() {
                        DecisionKind::Updating => TraceKind::UpdateDecision,
                        DecisionKind::Offloading => TraceKind::OffloadDecision,
                    },
                    dp.device,
                    dp.task,
                    0,
                    0.0,
                );
                self.pending = Some(dp.clone());
                return Ok(Step::Decision(dp));
            }
            let Some(ev) = self.events.pop() else {
                return Ok(self.finish());
            };
            if let Horizon::Time(limit) = self.config.horizon {
                if ev.time > limit {
                    self.now = limit;
                    return Ok(self.finish());
                }
            }
            debug_assert!(ev.time >= self.now);
            self.now = ev.time;
            match ev.class {
                EventClass::Generate => self.on_generate(ev.target),
                EventClass::LocalDone => self.on_local_done(ev.target),
                EventClass::Arrival => self.on_arrival(ev.target),
                EventClass::EdgeDone => self.on_edge_done(ev.target),
                EventClass::Drop => self.on_drop(ev.target),
            }
        }
    }

    fn finish(&mut self) -> Step {
        self.ended = true;
        self.log.end_time = self.now;
        Step::EpisodeEnd
    }

    fn take_pending(&mut self, device: usize, kind: DecisionKind) -> Result<DecisionPoint, SimError> {
        match &self.pending {
            Some(p) if p.device == device && p.kind() == kind => Ok(self.pending.take().unwrap()),
            _ => Err(SimError::OutOfTurn {
                device,
                expected: kind.as_str(),
            }),
        }
    }

    /// Answers an updating decision. `z` is clamped into `[0, z_max]`.
    pub fn apply_update_action(&mut self, device: usize, z: f64) -> Result<(), SimError> {
        if z.is_nan() {
            return Err(SimError::NanWait);
        }
        let dp = self.take_pending(device, DecisionKind::Updating)?;
        let clamped = z.clamp(0.0, self.config.z_max);
        if clamped != z {
            self.log.clamped_actions += 1;
            ::log::debug!("device {device}: waiting time {z} clamped to {clamped}");
        }
        self.devices[device].next_wait = clamped;
        self.trace(TraceKind::WaitApplied, device, dp.task, 0, clamped);
        let at = self.now + clamped;
        self.schedule(at, EventClass::Generate, device);
        Ok(())
    }

    /// Answers an offloading decision: 0 = local, `n` = edge `n`.
    pub fn apply_offload_action(&mut self, device: usize, route: usize) -> Result<(), SimError> {
        if route > self.config.num_edges {
            return Err(SimError::RouteOutOfRange {
                route,
                num_edges: self.config.num_edges,
            });
        }
        let dp = self.take_pending(device, DecisionKind::Offloading)?;
        let slot = self
            .log
            .tasks
            .iter()
            .rposition(|t| t.device == device && t.index == dp.task)
            .expect("generated task is logged");
        self.trace(TraceKind::RouteApplied, device, dp.task, route, 0.0);
        let forced = self.devices[device].forced.pop_front().unwrap_or_default();
        let gen = self.log.tasks[slot].gen_time;
        let deadline = gen + self.drop_time;
        self.log.tasks[slot].route = route;
        if route == 0 {
            let tau = forced
                .tau_local
                .unwrap_or_else(|| self.draw_service(device, self.local_mean));
            self.log.tasks[slot].tau_local = Some(tau);
            if gen + tau <= deadline {
                self.schedule(gen + tau, EventClass::LocalDone, slot);
            } else {
                self.schedule(deadline, EventClass::Drop, slot);
            }
        } else {
            let tran = forced.tau_tran.unwrap_or_else(|| {
                let exp = Exp::new(1.0 / self.config.transmission_mean).expect("positive rate");
                exp.sample(&mut self.devices[device].rng)
            });
            let edge_mean = self.edges[route - 1].mean;
            let service = forced
                .tau_edge
                .unwrap_or_else(|| self.draw_service(device, edge_mean));
            let task = &mut self.log.tasks[slot];
            task.tau_tran = Some(tran);
            task.tau_edge = Some(service);
            if gen + tran < deadline {
                self.schedule(gen + tran, EventClass::Arrival, slot);
            }
            if deadline.is_finite() {
                self.schedule(deadline, EventClass::Drop, slot);
            }
        }
        Ok(())
    }

    /// Convenience dispatcher for [`Action`] values.
    pub fn apply(&mut self, device: usize, action: Action) -> Result<(), SimError> {
        match action {
            Action::Wait(z) => self.apply_update_action(device, z),
            Action::Route(x) => self.apply_offload_action(device, x),
        }
    }

    fn draw_service(&mut self, device: usize, mean: f64) -> f64 {
        let rng = &mut self.devices[device].rng;
        match self.config.service_distribution {
            ServiceDistribution::Exponential => Exp::new(1.0 / mean).expect("positive rate").sample(rng),
            ServiceDistribution::Lognormal => {
                let sigma = self.config.lognormal_sigma;
                LogNormal::new(mean.ln() - 0.5 * sigma * sigma, sigma)
                    .expect("valid lognormal")
                    .sample(rng)
            }
        }
    }

    fn schedule(&mut self, time: f64, class: EventClass, target: usize) {
        self.seq += 1;
        self.events.push(Scheduled {
            time,
            class,
            seq: self.seq,
            target,
        });
    }

    fn trace(&mut self, kind: TraceKind, device: usize, task: u64, aux: usize, value: f64) {
        self.log.events.push(TraceEvent {
            time: self.now,
            kind,
            device,
            task,
            aux,
            value,
        });
    }

    fn push_update_decision(&mut self, device: usize, prev_delay: f64) {
        let task = self.devices[device].generated;
        self.ready.push_back(DecisionPoint {
            device,
            time: self.now,
            task,
            observation: Observation::PrevDelay(prev_delay),
        });
    }

    fn queue_snapshot(&self) -> Vec<usize> {
        self.edges.iter().map(Edge::occupancy).collect()
    }

    fn on_generate(&mut self, device: usize) {
        let dev = &mut self.devices[device];
        let index = dev.generated;
        dev.generated += 1;
        let wait = dev.next_wait;
        self.log.tasks.push(TaskRecord {
            device,
            index,
            gen_time: self.now,
            wait_before: wait,
            route: 0,
            tau_local: None,
            tau_tran: None,
            tau_edge: None,
            arrival_time: None,
            service_start: None,
            edge_wait: None,
            outcome: Outcome::InFlight,
        });
        self.trace(TraceKind::Generated, device, index, 0, wait);
        let snapshot = self.queue_snapshot();
        self.ready.push_back(DecisionPoint {
            device,
            time: self.now,
            task: index,
            observation: Observation::QueueLengths(snapshot),
        });
    }

    fn on_local_done(&mut self, slot: usize) {
        self.complete(slot);
    }

    fn on_arrival(&mut self, slot: usize) {
        let task = &mut self.log.tasks[slot];
        if task.is_resolved() {
            return;
        }
        task.arrival_time = Some(self.now);
        let (device, index, edge) = (task.device, task.index, task.route);
        self.trace(TraceKind::EdgeArrival, device, index, edge, 0.0);
        self.edges[edge - 1].queue.push_back(slot);
        self.try_start_service(edge - 1);
    }

    fn try_start_service(&mut self, edge: usize) {
        if self.edges[edge].in_service.is_some() {
            return;
        }
        let Some(slot) = self.edges[edge].queue.pop_front() else {
            return;
        };
        self.edges[edge].in_service = Some(slot);
        let task = &mut self.log.tasks[slot];
        let wait = self.now - task.arrival_time.expect("queued task has arrived");
        task.service_start = Some(self.now);
        task.edge_wait = Some(wait);
        let service = task.tau_edge.expect("edge task has a service draw");
        let (device, index) = (task.device, task.index);
        self.trace(TraceKind::ServiceStart, device, index, edge + 1, wait);
        self.schedule(self.now + service, EventClass::EdgeDone, slot);
    }

    fn on_edge_done(&mut self, slot: usize) {
        if self.log.tasks[slot].is_resolved() {
            return;
        }
        let edge = self.log.tasks[slot].route - 1;
        debug_assert_eq!(self.edges[edge].in_service, Some(slot));
        self.edges[edge].in_service = None;
        self.complete(slot);
        self.try_start_service(edge);
    }

    fn on_drop(&mut self, slot: usize) {
        let task = &self.log.tasks[slot];
        if task.is_resolved() {
            return;
        }
        if task.route > 0 {
            let edge = task.route - 1;
            if self.edges[edge].in_service == Some(slot) {
                self.edges[edge].in_service = None;
                self.resolve(slot, Outcome::Dropped { time: self.now });
                self.try_start_service(edge);
                return;
            }
            if let Some(pos) = self.edges[edge].queue.iter().position(|&s| s == slot) {
                self.edges[edge].queue.remove(pos);
                let task = &mut self.log.tasks[slot];
                task.edge_wait = Some(self.now - task.arrival_time.expect("queued task has arrived"));
            }
        }
        self.resolve(slot, Outcome::Dropped { time: self.now });
    }

    fn complete(&mut self, slot: usize) {
        let delay = self.now - self.log.tasks[slot].gen_time;
        self.resolve(slot, Outcome::Completed { time: self.now, delay });
    }

    fn resolve(&mut self, slot: usize, outcome: Outcome) {
        let task = &mut self.log.tasks[slot];
        task.outcome = outcome;
        let (device, index) = (task.device, task.index);
        let observed = match outcome {
            Outcome::Completed { delay, .. } => {
                self.trace(TraceKind::Completed, device, index, 0, delay);
                delay
            }
            _ => {
                self.trace(TraceKind::Dropped, device, index, 0, self.drop_time);
                self.drop_time
            }
        };
        if self.resolutions.is_some() {
            let queues = self.queue_snapshot();
            let time = self.now;
            if let Some(buf) = self.resolutions.as_mut() {
                buf.push(Resolution {
                    device,
                    task: index,
                    slot,
                    time,
                    queues,
                });
            }
        }
        let dev = &mut self.devices[device];
        dev.resolved += 1;
        let more = match self.config.horizon {
            Horizon::Tasks(limit) => dev.resolved < limit,
            Horizon::Time(_) => true,
        };
        if more {
            self.push_update_decision(device, observed);
        }
    }
}

/// Maps decision points to actions for one device.
pub trait SchedulingPolicy {
    fn decide(&mut self, decision: &DecisionPoint) -> Action;
}

impl<F: FnMut(&DecisionPoint) -> Action> SchedulingPolicy for F {
    fn decide(&mut self, decision: &DecisionPoint) -> Action {
        self(decision)
    }
}

/// Drives a simulation to its horizon with one policy per device.
pub fn run_with_policies<P: SchedulingPolicy + ?Sized>(
    mut sim: Simulation,
    policies: &mut [Box<P>],
) -> Result<EpisodeLog, SimError> {
    if policies.len() != sim.config.num_devices {
        return Err(SimError::Config {
            field: "policies".into(),
            message: format!(
                "expected {} policies, got {}",
                sim.config.num_devices,
                policies.len()
            ),
        });
    }
    loop {
        match sim.next_decision()? {
            Step::EpisodeEnd => return Ok(sim.into_log()),
            Step::Decision(dp) => {
                let action = policies[dp.device].decide(&dp);
                let well_formed = matches!(
                    (dp.kind(), action),
                    (DecisionKind::Updating, Action::Wait(z)) if !z.is_nan()
                ) || matches!(
                    (dp.kind(), action),
                    (DecisionKind::Offloading, Action::Route(x)) if x <= sim.config.num_edges
                );
                if !well_formed {
                    return Err(SimError::Policy {
                        device: dp.device,
                        decision: Box::new(dp),
                        action,
                    });
                }
                sim.apply(dp.device, action)?;
            }
        }
    }
}
