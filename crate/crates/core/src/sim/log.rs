use std::io;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// How a task left the system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    InFlight,
    Completed { time: f64, delay: f64 },
    Dropped { time: f64 },
}

/// Full lifecycle of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub device: usize,
    /// Per-device task index, from 0.
    pub index: u64,
    pub gen_time: f64,
    /// Waiting time chosen before this task was generated.
    pub wait_before: f64,
    /// 0 = local, `n` = edge `n` (1-based).
    pub route: usize,
    pub tau_local: Option<f64>,
    pub tau_tran: Option<f64>,
    pub tau_edge: Option<f64>,
    pub arrival_time: Option<f64>,
    pub service_start: Option<f64>,
    pub edge_wait: Option<f64>,
    pub outcome: Outcome,
}

impl TaskRecord {
    pub fn is_resolved(&self) -> bool {
        !matches!(self.outcome, Outcome::InFlight)
    }

    pub fn is_dropped(&self) -> bool {
        matches!(self.outcome, Outcome::Dropped { .. })
    }

    pub fn resolution_time(&self) -> Option<f64> {
        match self.outcome {
            Outcome::InFlight => None,
            Outcome::Completed { time, .. } | Outcome::Dropped { time } => Some(time),
        }
    }

    pub fn delay(&self) -> Option<f64> {
        match self.outcome {
            Outcome::Completed { delay, .. } => Some(delay),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    UpdateDecision,
    WaitApplied,
    Generated,
    OffloadDecision,
    RouteApplied,
    EdgeArrival,
    ServiceStart,
    Completed,
    Dropped,
}

/// One line of the event trace. `aux` carries the edge (1-based) or route
/// where relevant, else 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time: f64,
    pub kind: TraceKind,
    pub device: usize,
    pub task: u64,
    pub aux: usize,
    pub value: f64,
}

/// Everything a run produced.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub num_devices: usize,
    pub num_edges: usize,
    pub drop_time: f64,
    /// Simulated time at which the run ended.
    pub end_time: f64,
    pub tasks: Vec<TaskRecord>,
    pub events: Vec<TraceEvent>,
    /// Waiting actions that were clamped into `[0, z_max]`.
    pub clamped_actions: u64,
}

#[derive(Debug, Serialize)]
struct TaskRow {
    device: usize,
    k: u64,
    t: f64,
    z: f64,
    x: usize,
    tau_local: Option<f64>,
    tau_tran: Option<f64>,
    tau_edge: Option<f64>,
    w: Option<f64>,
    t_done: Option<f64>,
    y: Option<f64>,
    dropped: bool,
}

impl EpisodeLog {
    /// Tasks of one device in generation order.
    pub fn device_tasks(&self, device: usize) -> impl Iterator<Item = &TaskRecord> {
        self.tasks.iter().filter(move |t| t.device == device)
    }

    /// Binary-stable encoding of the task table and event trace: fixed-width
    /// little-endian integers and IEEE-754 bit patterns.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        fn f(buf: &mut Vec<u8>, v: f64) {
            buf.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        fn u(buf: &mut Vec<u8>, v: u64) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        fn opt(buf: &mut Vec<u8>, v: Option<f64>) {
            match v {
                Some(x) => {
                    buf.push(1);
                    f(buf, x);
                }
                None => buf.push(0),
            }
        }
        let mut buf = Vec::with_capacity(64 * (self.tasks.len() + self.events.len()));
        u(&mut buf, self.num_devices as u64);
        u(&mut buf, self.num_edges as u64);
        f(&mut buf, self.drop_time);
        f(&mut buf, self.end_time);
        u(&mut buf, self.clamped_actions);
        u(&mut buf, self.tasks.len() as u64);
        for t in &self.tasks {
            u(&mut buf, t.device as u64);
            u(&mut buf, t.index);
            f(&mut buf, t.gen_time);
            f(&mut buf, t.wait_before);
            u(&mut buf, t.route as u64);
            opt(&mut buf, t.tau_local);
            opt(&mut buf, t.tau_tran);
            opt(&mut buf, t.tau_edge);
            opt(&mut buf, t.arrival_time);
            opt(&mut buf, t.service_start);
            opt(&mut buf, t.edge_wait);
            match t.outcome {
                Outcome::InFlight => buf.push(0),
                Outcome::Completed { time, delay } => {
                    buf.push(1);
                    f(&mut buf, time);
                    f(&mut buf, delay);
                }
                Outcome::Dropped { time } => {
                    buf.push(2);
                    f(&mut buf, time);
                }
            }
        }
        u(&mut buf, self.events.len() as u64);
        for e in &self.events {
            f(&mut buf, e.time);
            buf.push(e.kind as u8);
            u(&mut buf, e.device as u64);
            u(&mut buf, e.task);
            u(&mut buf, e.aux as u64);
            f(&mut buf, e.value);
        }
        buf
    }

    /// SHA-256 of [`canonical_bytes`](Self::canonical_bytes), hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// One row per task: `device,k,t,z,x,tau_local,tau_tran,tau_edge,w,t_done,y,dropped`.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        for t in &self.tasks {
            w.serialize(TaskRow {
                device: t.device,
                k: t.index,
                t: t.gen_time,
                z: t.wait_before,
                x: t.route,
                tau_local: t.tau_local,
                tau_tran: t.tau_tran,
                tau_edge: t.tau_edge,
                w: t.edge_wait,
                t_done: t.resolution_time(),
                y: t.delay(),
                dropped: t.is_dropped(),
            })?;
        }
        w.flush()?;
        Ok(())
    }
}
