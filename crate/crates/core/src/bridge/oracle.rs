//! Offline reconstruction of the experience stream from a finished log.
//!
//! Queue snapshots are rebuilt from the event trace and costs from the task
//! records, independently of the live session bookkeeping.

use std::collections::HashMap;

use super::protocol::{encode, Experience, GammaUpdateMsg, Message};
use super::session::SessionPlan;
use crate::aoi::{trapezoid_area, AoiError, CostMode, DropMode};
use crate::sim::{Action, DecisionKind, EpisodeLog, Observation, Outcome, TraceKind};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OracleOutput {
    pub experiences: Vec<Experience>,
    pub gamma_updates: Vec<GammaUpdateMsg>,
}

pub fn experiences_from_log(
    log: &EpisodeLog,
    plan: &SessionPlan,
    devices: &[usize],
) -> Result<OracleOutput, AoiError> {
    let mut occupancy = vec![0usize; log.num_edges];
    let mut at_edge: HashMap<(usize, u64), usize> = HashMap::new();
    let mut offload_q: HashMap<(usize, u64), Vec<usize>> = HashMap::new();
    let mut resolve_q: HashMap<(usize, u64), Vec<usize>> = HashMap::new();
    for e in &log.events {
        let key = (e.device, e.task);
        match e.kind {
            TraceKind::EdgeArrival => {
                occupancy[e.aux - 1] += 1;
                at_edge.insert(key, e.aux - 1);
            }
            TraceKind::OffloadDecision => {
                offload_q.insert(key, occupancy.clone());
            }
            TraceKind::Completed | TraceKind::Dropped => {
                if let Some(edge) = at_edge.remove(&key) {
                    occupancy[edge] -= 1;
                }
                resolve_q.insert(key, occupancy.clone());
            }
            _ => {}
        }
    }

    let mut out = OracleOutput::default();
    for &d in devices {
        let tasks: Vec<_> = log.device_tasks(d).collect();
        let mut gamma = plan.initial_gamma;
        let (mut num, mut den, mut records) = (0.0, 0.0, 0usize);
        let mut last_delay: Option<f64> = None;
        let mut pending: Vec<usize> = Vec::new();
        for (j, t) in tasks.iter().enumerate() {
            let episode = j / plan.steps as usize;
            pending.push(j);
            match t.outcome {
                Outcome::InFlight => break,
                Outcome::Completed { delay, .. } => {
                    if let Some(y_prev) = last_delay {
                        let z: f64 = pending
                            .iter()
                            .map(|&p| {
                                tasks[p].wait_before + if p == j { 0.0 } else { log.drop_time }
                            })
                            .sum();
                        let area = trapezoid_area(y_prev, z, delay)?;
                        let span = y_prev + z;
                        let cost = match plan.cost_mode {
                            CostMode::Fractional => area - gamma * span,
                            CostMode::Ratio => area / span,
                        };
                        num += area;
                        den += span;
                        records += 1;
                        for &p in &pending {
                            let task = tasks[p];
                            let key = (d, task.index);
                            let seen = if p == 0 {
                                0.0
                            } else {
                                tasks[p - 1].delay().unwrap_or(log.drop_time)
                            };
                            let next_seen = task.delay().unwrap_or(log.drop_time);
                            let base = Experience {
                                seq: 0,
                                device: d,
                                episode,
                                kind: DecisionKind::Updating,
                                task: t.index,
                                state: Observation::PrevDelay(seen),
                                action: Action::Wait(task.wait_before),
                                cost,
                                next_state: Observation::PrevDelay(next_seen),
                                gamma,
                            };
                            out.experiences.push(base.clone());
                            out.experiences.push(Experience {
                                kind: DecisionKind::Offloading,
                                state: Observation::QueueLengths(offload_q[&key].clone()),
                                action: Action::Route(task.route),
                                next_state: Observation::QueueLengths(resolve_q[&key].clone()),
                                ..base
                            });
                        }
                    }
                    pending.clear();
                    last_delay = Some(delay);
                }
                Outcome::Dropped { .. } => {
                    if plan.drop_mode == DropMode::Skip {
                        pending.clear();
                        last_delay = None;
                    }
                }
            }
            if (j + 1) % plan.steps as usize == 0 {
                let carried = records == 0;
                let next = if carried { gamma } else { num / den };
                out.gamma_updates.push(GammaUpdateMsg {
                    seq: 0,
                    device: d,
                    episode,
                    gamma: next,
                    numerator: num,
                    denominator: den,
                    records,
                    carried,
                });
                gamma = next;
                (num, den, records) = (0.0, 0.0, 0);
            }
        }
    }
    Ok(out)
}

/// NDJSON lines with `seq` cleared, grouped by device with each device's
/// order preserved.
pub fn canonical_experiences(experiences: &[Experience]) -> Vec<String> {
    let mut items: Vec<(usize, String)> = experiences
        .iter()
        .map(|e| {
            let mut m = Message::Experience(e.clone());
            m.set_seq(0);
            (e.device, String::from_utf8(encode(&m)).expect("json is utf-8"))
        })
        .collect();
    items.sort_by_key(|(d, _)| *d);
    items.into_iter().map(|(_, s)| s).collect()
}
