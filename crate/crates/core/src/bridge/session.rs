use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::protocol::*;
use super::BridgeError;
use crate::aoi::{episode_gamma_update, CostLedger, CostMode, DropMode, GammaUpdate, RecordBuilder};
use crate::sim::{
    Action, DecisionKind, DecisionPoint, Horizon, Observation, Outcome, Resolution, SchedulingPolicy, SimConfig,
    Simulation, Step,
};

/// Episode layout of a session: `episodes` per-device episodes of `steps`
/// tasks each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SessionPlan {
    pub episodes: usize,
    pub steps: u64,
    pub initial_gamma: f64,
    /// The quotient is refreshed every this many episodes, from the records
    /// of those episodes; in between, `gamma_update` carries it unchanged.
    pub gamma_period: usize,
    pub cost_mode: CostMode,
    pub drop_mode: DropMode,
}

impl Default for SessionPlan {
    fn default() -> Self {
        Self {
            episodes: 10,
            steps: 200,
            initial_gamma: 0.0,
            gamma_period: 1,
            cost_mode: CostMode::Fractional,
            drop_mode: DropMode::FoldIn,
        }
    }
}

impl SessionPlan {
    pub fn validate(&self) -> Result<(), BridgeError> {
        if self.episodes == 0 || self.steps == 0 || self.gamma_period == 0 {
            return Err(BridgeError::Config(
                "episodes, steps and gamma_period must be positive".into(),
            ));
        }
        if !(self.initial_gamma >= 0.0 && self.initial_gamma.is_finite()) {
            return Err(BridgeError::Config("initial_gamma must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Per-device, per-episode outcome kept for every device, local or remote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStat {
    pub device: usize,
    pub episode: usize,
    /// Quotient in force during the episode.
    pub gamma: f64,
    /// Quotient produced at its end.
    pub next_gamma: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub records: usize,
    pub avg_aoi: f64,
    pub tasks: u64,
    pub drops: u64,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone)]
struct TaskDecisions {
    task: u64,
    update_state: f64,
    queues: Vec<usize>,
}

/// A resolved task whose decisions still wait for their cost.
#[derive(Debug, Clone)]
struct Unpriced {
    decisions: TaskDecisions,
    wait: f64,
    route: usize,
    next_update_state: f64,
    next_queues: Vec<usize>,
}

struct DeviceState {
    episode: usize,
    ledger: CostLedger,
    builder: RecordBuilder,
    decisions: VecDeque<TaskDecisions>,
    unpriced: Vec<Unpriced>,
    age_basis: f64,
    age_time: f64,
    age_area: f64,
    episode_start: f64,
    episode_drops: u64,
    last_client_seq: Option<u64>,
    claimed: bool,
    done: bool,
}

/// The single owner of a simulation served over the bridge protocol.
///
/// Devices with a local policy are answered in-process; the others are
/// driven by remote clients. Message handling is transport-agnostic: feed
/// client messages to [`Session::handle`] and deliver what it returns.
pub struct Session {
    sim: Simulation,
    plan: SessionPlan,
    local: Vec<Option<Box<dyn SchedulingPolicy + Send>>>,
    devices: Vec<DeviceState>,
    seq: u64,
    next_token: u64,
    pending: Option<(u64, DecisionPoint)>,
    started: bool,
    finished: bool,
    stats: Vec<EpisodeStat>,
}

impl Session {
    /// `local[d] = Some(policy)` answers device `d` in-process. The config's
    /// horizon is replaced by `episodes × steps` tasks.
    pub fn new(
        mut config: SimConfig,
        plan: SessionPlan,
        local: Vec<Option<Box<dyn SchedulingPolicy + Send>>>,
    ) -> Result<Self, BridgeError> {
        plan.validate()?;
        if local.len() != config.num_devices {
            return Err(BridgeError::Config(format!(
                "{} policy slots for {} devices",
                local.len(),
                config.num_devices
            )));
        }
        config.horizon = Horizon::Tasks(plan.episodes as u64 * plan.steps);
        let mut sim = Simulation::build(config)?;
        sim.track_resolutions();
        let drop_time = sim.drop_time();
        let devices = (0..local.len())
            .map(|d| DeviceState {
                episode: 0,
                ledger: CostLedger::new(d, 0, plan.initial_gamma),
                builder: RecordBuilder::new(plan.drop_mode, drop_time),
                decisions: VecDeque::new(),
                unpriced: Vec::new(),
                age_basis: 0.0,
                age_time: 0.0,
                age_area: 0.0,
                episode_start: 0.0,
                episode_drops: 0,
                last_client_seq: None,
                claimed: local[d].is_some(),
                done: false,
            })
            .collect();
        Ok(Self {
            sim,
            plan,
            local,
            devices,
            seq: 0,
            next_token: 0,
            pending: None,
            started: false,
            finished: false,
            stats: Vec::new(),
        })
    }

    /// A session whose devices are all answered in-process.
    pub fn all_local(
        config: SimConfig,
        plan: SessionPlan,
        policies: Vec<Box<dyn SchedulingPolicy + Send>>,
    ) -> Result<Self, BridgeError> {
        Self::new(config, plan, policies.into_iter().map(Some).collect())
    }

    pub fn info(&self) -> SessionInfo {
        let c = self.sim.config();
        SessionInfo {
            num_devices: c.num_devices,
            num_edges: c.num_edges,
            z_max: c.z_max,
            drop_time: self.sim.drop_time(),
            episodes: self.plan.episodes,
            steps: self.plan.steps,
            cost_mode: self.plan.cost_mode,
            drop_mode: self.plan.drop_mode,
        }
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// The device has played its last episode.
    pub fn is_device_done(&self, device: usize) -> bool {
        self.finished || self.devices.get(device).is_none_or(|d| d.done)
    }

    pub fn is_remote(&self, device: usize) -> bool {
        self.local.get(device).is_some_and(Option::is_none)
    }

    pub fn stats(&self) -> &[EpisodeStat] {
        &self.stats
    }

    pub fn simulation(&self) -> &Simulation {
        &self.sim
    }

    pub fn into_parts(self) -> (Simulation, Vec<EpisodeStat>) {
        (self.sim, self.stats)
    }

    /// Runs a session without remote devices to completion.
    pub fn run_local(&mut self) -> Result<(), BridgeError> {
        if (0..self.devices.len()).any(|d| self.is_remote(d)) {
            return Err(BridgeError::Config("session has remote devices".into()));
        }
        let out = self.start()?;
        debug_assert!(out.is_empty());
        Ok(())
    }

    /// Decodes and handles one line; malformed input yields an error reply.
    pub fn handle_line(&mut self, line: &str) -> Result<Vec<Message>, BridgeError> {
        match decode(line.as_bytes()) {
            Ok(msg) => self.handle(msg),
            Err(e) => Ok(vec![self.error(0, 0, ErrorCode::Malformed, e.to_string())]),
        }
    }

    pub fn handle(&mut self, msg: Message) -> Result<Vec<Message>, BridgeError> {
        let device = msg.device();
        if device >= self.devices.len() {
            return Ok(vec![self.error(
                device,
                msg.episode(),
                ErrorCode::UnknownDevice,
                format!("no device {device}"),
            )]);
        }
        if let Some(last) = self.devices[device].last_client_seq {
            if msg.seq() <= last {
                return Ok(vec![self.error(
                    device,
                    msg.episode(),
                    ErrorCode::BadSequence,
                    format!("seq {} after {last}", msg.seq()),
                )]);
            }
        }
        match msg {
            Message::Hello(h) => self.on_hello(h),
            Message::Action(a) => {
                self.devices[device].last_client_seq = Some(a.seq);
                self.on_action(a)
            }
            other => Ok(vec![self.error(
                device,
                other.episode(),
                ErrorCode::Unexpected,
                format!("clients do not send {}", other.type_name()),
            )]),
        }
    }

    fn on_hello(&mut self, h: Hello) -> Result<Vec<Message>, BridgeError> {
        if h.protocol != PROTOCOL_VERSION {
            return Ok(vec![self.error(
                h.device,
                0,
                ErrorCode::Unexpected,
                format!("protocol {} unsupported, server speaks {PROTOCOL_VERSION}", h.protocol),
            )]);
        }
        let claims: Vec<usize> = if h.devices.is_empty() {
            (0..self.devices.len()).filter(|&d| self.is_remote(d)).collect()
        } else {
            h.devices.clone()
        };
        for &d in &claims {
            if d >= self.devices.len() {
                return Ok(vec![self.error(h.device, 0, ErrorCode::UnknownDevice, format!("no device {d}"))]);
            }
            if self.devices[d].claimed || !self.is_remote(d) {
                return Ok(vec![self.error(h.device, 0, ErrorCode::DeviceTaken, format!("device {d} is taken"))]);
            }
        }
        if claims.is_empty() {
            return Ok(vec![self.error(h.device, 0, ErrorCode::DeviceTaken, "no devices left".into())]);
        }
        for &d in &claims {
            self.devices[d].claimed = true;
            self.devices[d].last_client_seq = Some(h.seq);
        }
        let mut out = Vec::new();
        let reply = Message::Hello(Hello {
            seq: 0,
            device: claims[0],
            episode: 0,
            protocol: PROTOCOL_VERSION,
            devices: claims,
            session: Some(self.info()),
        });
        self.emit(&mut out, reply);
        if self.devices.iter().all(|d| d.claimed) {
            out.extend(self.start()?);
        }
        Ok(out)
    }

    fn start(&mut self) -> Result<Vec<Message>, BridgeError> {
        let mut out = Vec::new();
        if self.started {
            return Ok(out);
        }
        self.started = true;
        for d in 0..self.devices.len() {
            let gamma = self.plan.initial_gamma;
            self.emit(
                &mut out,
                Message::EpisodeBegin(EpisodeBegin {
                    seq: 0,
                    device: d,
                    episode: 0,
                    gamma,
                }),
            );
        }
        self.advance(&mut out)?;
        Ok(out)
    }

    fn on_action(&mut self, a: ActionMsg) -> Result<Vec<Message>, BridgeError> {
        let Some((token, dp)) = self.pending.clone() else {
            return Ok(vec![self.error(a.device, a.episode, ErrorCode::StaleToken, "no decision is pending".into())]);
        };
        if a.token != token || a.device != dp.device {
            return Ok(vec![self.error(
                a.device,
                a.episode,
                ErrorCode::StaleToken,
                format!("token {} for device {} is not pending", a.token, a.device),
            )]);
        }
        let action = match (dp.kind(), a.z, a.x) {
            (DecisionKind::Updating, Some(z), None) => Action::Wait(z),
            (DecisionKind::Offloading, None, Some(x)) if x <= self.sim.config().num_edges => Action::Route(x),
            (DecisionKind::Offloading, None, Some(x)) => {
                return Ok(vec![self.error(
                    a.device,
                    a.episode,
                    ErrorCode::InvalidAction,
                    format!("route {x} outside 0..={}", self.sim.config().num_edges),
                )])
            }
            _ => {
                return Ok(vec![self.error(
                    a.device,
                    a.episode,
                    ErrorCode::WrongKind,
                    match dp.kind() {
                        DecisionKind::Updating => "updating decision needs `z` and no `x`",
                        DecisionKind::Offloading => "offloading decision needs `x` and no `z`",
                    }
                    .into(),
                )])
            }
        };
        self.pending = None;
        self.sim.apply(dp.device, action)?;
        let mut out = Vec::new();
        self.advance(&mut out)?;
        Ok(out)
    }

    /// Steps the simulation until a remote device must act or the run ends.
    fn advance(&mut self, out: &mut Vec<Message>) -> Result<(), BridgeError> {
        loop {
            let step = self.sim.next_decision()?;
            for r in self.sim.drain_resolutions() {
                self.on_resolution(r, out)?;
            }
            match step {
                Step::EpisodeEnd => {
                    self.finished = true;
                    return Ok(());
                }
                Step::Decision(dp) => {
                    self.note_decision(&dp);
                    if let Some(policy) = self.local[dp.device].as_mut() {
                        let action = policy.decide(&dp);
                        self.sim.apply(dp.device, action)?;
                        continue;
                    }
                    let token = self.next_token;
                    self.next_token += 1;
                    let msg = Message::Decision(Decision {
                        seq: 0,
                        device: dp.device,
                        episode: (dp.task / self.plan.steps) as usize,
                        token,
                        kind: dp.kind(),
                        task: dp.task,
                        time: dp.time,
                        state: dp.observation.clone(),
                    });
                    self.pending = Some((token, dp));
                    self.emit(out, msg);
                    return Ok(());
                }
            }
        }
    }

    fn note_decision(&mut self, dp: &DecisionPoint) {
        let dev = &mut self.devices[dp.device];
        match &dp.observation {
            Observation::PrevDelay(y) => dev.decisions.push_back(TaskDecisions {
                task: dp.task,
                update_state: *y,
                queues: Vec::new(),
            }),
            Observation::QueueLengths(q) => {
                let entry = dev
                    .decisions
                    .back_mut()
                    .filter(|e| e.task == dp.task)
                    .expect("offloading follows the task's updating decision");
                entry.queues = q.clone();
            }
        }
    }

    fn on_resolution(&mut self, r: Resolution, out: &mut Vec<Message>) -> Result<(), BridgeError> {
        let task = self.sim.log().tasks[r.slot].clone();
        let drop_time = self.sim.drop_time();
        let (cost_mode, steps, episodes, gamma_period) = (
            self.plan.cost_mode,
            self.plan.steps,
            self.plan.episodes,
            self.plan.gamma_period,
        );
        let remote = self.is_remote(r.device);
        let mut emitted = Vec::new();
        let mut finished_episode = None;
        {
            let dev = &mut self.devices[r.device];
            let decisions = dev.decisions.pop_front().expect("resolved task had decisions");
            debug_assert_eq!(decisions.task, task.index);

            let u = r.time - dev.age_basis;
            let v = dev.age_time - dev.age_basis;
            dev.age_area += 0.5 * (u * u - v * v);
            dev.age_time = r.time;

            let (next_update_state, completed) = match task.outcome {
                Outcome::Completed { delay, .. } => {
                    dev.age_basis = task.gen_time;
                    (delay, true)
                }
                Outcome::Dropped { .. } => {
                    dev.episode_drops += 1;
                    (drop_time, false)
                }
                Outcome::InFlight => unreachable!("resolution of an unresolved task"),
            };
            dev.unpriced.push(Unpriced {
                decisions,
                wait: task.wait_before,
                route: task.route,
                next_update_state,
                next_queues: r.queues.clone(),
            });

            match dev.builder.push(&task) {
                Some(record) => {
                    let gamma = dev.ledger.gamma;
                    let cost = record.cost(gamma, cost_mode)?;
                    dev.ledger.push(record);
                    for p in dev.unpriced.drain(..) {
                        emitted.push(Experience {
                            seq: 0,
                            device: r.device,
                            episode: dev.episode,
                            kind: DecisionKind::Updating,
                            task: task.index,
                            state: Observation::PrevDelay(p.decisions.update_state),
                            action: Action::Wait(p.wait),
                            cost,
                            next_state: Observation::PrevDelay(p.next_update_state),
                            gamma,
                        });
                        emitted.push(Experience {
                            seq: 0,
                            device: r.device,
                            episode: dev.episode,
                            kind: DecisionKind::Offloading,
                            task: task.index,
                            state: Observation::QueueLengths(p.decisions.queues),
                            action: Action::Route(p.route),
                            cost,
                            next_state: Observation::QueueLengths(p.next_queues),
                            gamma,
                        });
                    }
                }
                None if completed || self.plan.drop_mode == DropMode::Skip => dev.unpriced.clear(),
                None => {}
            }

            if (task.index + 1).is_multiple_of(steps) {
                let refresh = (dev.episode + 1).is_multiple_of(gamma_period);
                let update = if refresh {
                    episode_gamma_update(&dev.ledger)
                } else {
                    GammaUpdate {
                        gamma: dev.ledger.gamma,
                        carried: true,
                    }
                };
                let duration = r.time - dev.episode_start;
                let stat = EpisodeStat {
                    device: r.device,
                    episode: dev.episode,
                    gamma: dev.ledger.gamma,
                    next_gamma: update.gamma,
                    numerator: dev.ledger.numerator,
                    denominator: dev.ledger.denominator,
                    records: dev.ledger.records.len(),
                    avg_aoi: if duration > 0.0 { dev.age_area / duration } else { 0.0 },
                    tasks: steps,
                    drops: dev.episode_drops,
                    start: dev.episode_start,
                    end: r.time,
                };
                if refresh {
                    dev.ledger = dev.ledger.next_episode(update.gamma);
                } else {
                    dev.ledger.episode += 1;
                }
                dev.episode += 1;
                dev.age_area = 0.0;
                dev.episode_start = r.time;
                dev.episode_drops = 0;
                dev.done = dev.episode >= episodes;
                finished_episode = Some((stat, update.carried));
            }
        }

        if remote {
            for e in emitted {
                self.emit(out, Message::Experience(e));
            }
        }
        if let Some((stat, carried)) = finished_episode {
            if remote {
                self.emit(
                    out,
                    Message::GammaUpdate(GammaUpdateMsg {
                        seq: 0,
                        device: stat.device,
                        episode: stat.episode,
                        gamma: stat.next_gamma,
                        numerator: stat.numerator,
                        denominator: stat.denominator,
                        records: stat.records,
                        carried,
                    }),
                );
                self.emit(
                    out,
                    Message::EpisodeEnd(EpisodeEnd {
                        seq: 0,
                        device: stat.device,
                        episode: stat.episode,
                        avg_aoi: stat.avg_aoi,
                        tasks: stat.tasks,
                        drops: stat.drops,
                    }),
                );
                if stat.episode + 1 < episodes {
                    self.emit(
                        out,
                        Message::EpisodeBegin(EpisodeBegin {
                            seq: 0,
                            device: stat.device,
                            episode: stat.episode + 1,
                            gamma: stat.next_gamma,
                        }),
                    );
                }
            }
            self.stats.push(stat);
        }
        Ok(())
    }

    fn emit(&mut self, out: &mut Vec<Message>, mut msg: Message) {
        if matches!(msg, Message::EpisodeBegin(_)) && !self.is_remote(msg.device()) {
            return;
        }
        msg.set_seq(self.seq);
        self.seq += 1;
        out.push(msg);
    }

    fn error(&mut self, device: usize, episode: usize, code: ErrorCode, message: String) -> Message {
        let mut msg = Message::Error(ErrorMsg {
            seq: 0,
            device,
            episode,
            code,
            message,
        });
        msg.set_seq(self.seq);
        self.seq += 1;
        msg
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{ActionSpace, BaselineKind, BaselinePolicy};

    fn config(devices: usize) -> SimConfig {
        SimConfig {
            num_devices: devices,
            seed: 3,
            ..SimConfig::default()
        }
    }

    fn plan() -> SessionPlan {
        SessionPlan {
            episodes: 3,
            steps: 20,
            ..SessionPlan::default()
        }
    }

    fn hello(seq: u64, devices: Vec<usize>) -> Message {
        Message::Hello(Hello {
            seq,
            device: devices.first().copied().unwrap_or(0),
            episode: 0,
            protocol: PROTOCOL_VERSION,
            devices,
            session: None,
        })
    }

    fn pending_decision(out: &[Message]) -> Decision {
        match out.last() {
            Some(Message::Decision(d)) => d.clone(),
            other => panic!("expected decision, got {other:?}"),
        }
    }

    #[test]
    fn local_session_collects_stats() {
        let c = config(3);
        let space = ActionSpace::of(&c);
        let policies: Vec<Box<dyn SchedulingPolicy + Send>> = (0..3)
            .map(|d| Box::new(BaselinePolicy::new(BaselineKind::Random, space, 1, d)) as _)
            .collect();
        let mut s = Session::all_local(c, plan(), policies).unwrap();
        s.run_local().unwrap();
        assert!(s.is_finished());
        assert_eq!(s.stats().len(), 9);
        for d in 0..3 {
            let g: Vec<_> = s.stats().iter().filter(|st| st.device == d).collect();
            assert_eq!(g.len(), 3);
            assert_eq!(g[0].gamma, 0.0);
            assert_eq!(g[1].gamma, g[0].next_gamma);
            assert_eq!(g[0].next_gamma, g[0].numerator / g[0].denominator);
        }
    }

    #[test]
    fn gamma_refreshes_on_period() {
        let c = config(1);
        let space = ActionSpace::of(&c);
        let p = SessionPlan {
            episodes: 4,
            gamma_period: 2,
            ..plan()
        };
        let policies: Vec<Box<dyn SchedulingPolicy + Send>> =
            vec![Box::new(BaselinePolicy::new(BaselineKind::ZeroWaitRandomRoute, space, 0, 0))];
        let mut s = Session::all_local(c, p, policies).unwrap();
        s.run_local().unwrap();
        let st = s.stats();
        assert_eq!(st[0].next_gamma, 0.0);
        assert_eq!(st[1].gamma, 0.0);
        assert!(st[1].records > st[0].records);
        assert_eq!(st[1].next_gamma, st[1].numerator / st[1].denominator);
        assert_eq!(st[2].next_gamma, st[1].next_gamma);
        assert_eq!(st[3].gamma, st[1].next_gamma);
    }

    #[test]
    fn errors_keep_session_alive() {
        let mut s = Session::new(config(1), plan(), vec![None]).unwrap();
        let out = s.handle_line("{not json").unwrap();
        assert!(matches!(&out[0], Message::Error(e) if e.code == ErrorCode::Malformed));
        let out = s.handle(hello(1, vec![5])).unwrap();
        assert!(matches!(&out[0], Message::Error(e) if e.code == ErrorCode::UnknownDevice));
        let out = s.handle(hello(2, vec![])).unwrap();
        assert!(matches!(&out[0], Message::Hello(h) if h.devices == vec![0] && h.session.is_some()));
        assert!(matches!(&out[1], Message::EpisodeBegin(_)));
        let d = pending_decision(&out);
        assert_eq!(d.kind, DecisionKind::Updating);

        let stale = Message::Action(ActionMsg {
            seq: 3,
            device: 0,
            episode: 0,
            token: d.token + 1,
            z: Some(0.0),
            x: None,
        });
        let out = s.handle(stale).unwrap();
        assert!(matches!(&out[0], Message::Error(e) if e.code == ErrorCode::StaleToken));
        let wrong = Message::Action(ActionMsg {
            seq: 4,
            device: 0,
            episode: 0,
            token: d.token,
            z: None,
            x: Some(1),
        });
        let out = s.handle(wrong).unwrap();
        assert!(matches!(&out[0], Message::Error(e) if e.code == ErrorCode::WrongKind));
        let replay = Message::Action(ActionMsg {
            seq: 4,
            device: 0,
            episode: 0,
            token: d.token,
            z: Some(0.0),
            x: None,
        });
        let out = s.handle(replay).unwrap();
        assert!(matches!(&out[0], Message::Error(e) if e.code == ErrorCode::BadSequence));

        // a negative wait is accepted on the wire and clamped by the simulator
        let ok = Message::Action(ActionMsg {
            seq: 5,
            device: 0,
            episode: 0,
            token: d.token,
            z: Some(-1.0),
            x: None,
        });
        let out = s.handle(ok).unwrap();
        let next = pending_decision(&out);
        assert_eq!(next.kind, DecisionKind::Offloading);
        assert_eq!(next.time, 0.0);
        assert_eq!(s.simulation().log().clamped_actions, 1);
    }

    #[test]
    fn remote_devices_must_be_claimed_before_start() {
        let c = config(2);
        let space = ActionSpace::of(&c);
        let local: Vec<Option<Box<dyn SchedulingPolicy + Send>>> = vec![
            None,
            Some(Box::new(BaselinePolicy::new(BaselineKind::AlwaysLocalZeroWait, space, 0, 1))),
        ];
        let mut s = Session::new(c, plan(), local).unwrap();
        let out = s.handle(hello(0, vec![1])).unwrap();
        assert!(matches!(&out[0], Message::Error(e) if e.code == ErrorCode::DeviceTaken));
        let out = s.handle(hello(1, vec![0])).unwrap();
        assert!(out.iter().all(|m| m.device() == 0));
        assert!(matches!(out.last(), Some(Message::Decision(_))));
        let seqs: Vec<u64> = out.iter().map(Message::seq).collect();
        assert!(seqs.windows(2).all(|w| w[0] < w[1]));
    }
}
