use std::collections::HashMap;

use super::log::{EpisodeLog, Outcome, TraceKind};

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    TimeWentBackwards { index: usize, time: f64, previous: f64 },
    FifoOrder { edge: usize, device: usize, task: u64 },
    QueueBound { edge: usize, time: f64, occupancy: usize },
    Unresolved { device: usize, task: u64 },
    ResolvedTwice { device: usize, task: u64 },
    DelayAboveDropTime { device: usize, task: u64, delay: f64 },
    DropTimeMismatch { device: usize, task: u64, time: f64 },
    Overlap { device: usize, task: u64 },
    GenerationGap { device: usize, task: u64, expected: f64, actual: f64 },
    LocalWithEdgeFields { device: usize, task: u64 },
}

/// Checks a finished log against the simulator's structural guarantees.
///
/// With `require_resolved`, tasks still in flight at the end of the run are
/// reported (appropriate for task-count horizons).
pub fn check_invariants(log: &EpisodeLog, require_resolved: bool) -> Vec<Violation> {
    let mut out = Vec::new();

    for (i, w) in log.events.windows(2).enumerate() {
        if w[1].time < w[0].time {
            out.push(Violation::TimeWentBackwards {
                index: i + 1,
                time: w[1].time,
                previous: w[0].time,
            });
        }
    }

    // FIFO: service starts at each edge follow arrival order, skipping tasks
    // dropped while queued.
    let mut arrivals: HashMap<usize, Vec<(usize, u64)>> = HashMap::new();
    let mut starts: HashMap<usize, Vec<(usize, u64)>> = HashMap::new();
    let mut occupancy = vec![0usize; log.num_edges];
    let mut at_edge: HashMap<(usize, u64), usize> = HashMap::new();
    let mut resolutions: HashMap<(usize, u64), usize> = HashMap::new();
    for e in &log.events {
        match e.kind {
            TraceKind::EdgeArrival => {
                arrivals.entry(e.aux).or_default().push((e.device, e.task));
                occupancy[e.aux - 1] += 1;
                at_edge.insert((e.device, e.task), e.aux);
                if occupancy[e.aux - 1] > log.num_devices {
                    out.push(Violation::QueueBound {
                        edge: e.aux,
                        time: e.time,
                        occupancy: occupancy[e.aux - 1],
                    });
                }
            }
            TraceKind::ServiceStart => {
                starts.entry(e.aux).or_default().push((e.device, e.task))
            }
            TraceKind::Completed | TraceKind::Dropped => {
                *resolutions.entry((e.device, e.task)).or_default() += 1;
                if let Some(edge) = at_edge.remove(&(e.device, e.task)) {
                    occupancy[edge - 1] -= 1;
                }
            }
            _ => {}
        }
    }
    for (edge, started) in &starts {
        let order = &arrivals[edge];
        let mut cursor = 0;
        for key in started {
            match order[cursor..].iter().position(|a| a == key) {
                Some(offset) => cursor += offset + 1,
                None => out.push(Violation::FifoOrder {
                    edge: *edge,
                    device: key.0,
                    task: key.1,
                }),
            }
        }
    }

    let mut last_resolution: Vec<Option<f64>> = vec![None; log.num_devices];
    let mut first_task = vec![true; log.num_devices];
    for t in &log.tasks {
        let key = (t.device, t.index);
        match resolutions.get(&key).copied().unwrap_or(0) {
            0 if require_resolved => out.push(Violation::Unresolved {
                device: t.device,
                task: t.index,
            }),
            0 | 1 => {}
            _ => out.push(Violation::ResolvedTwice {
                device: t.device,
                task: t.index,
            }),
        }
        match t.outcome {
            Outcome::Completed { delay, .. } if delay > log.drop_time => {
                out.push(Violation::DelayAboveDropTime {
                    device: t.device,
                    task: t.index,
                    delay,
                })
            }
            Outcome::Dropped { time } if time != t.gen_time + log.drop_time => {
                out.push(Violation::DropTimeMismatch {
                    device: t.device,
                    task: t.index,
                    time,
                })
            }
            _ => {}
        }
        if t.route == 0 && (t.tau_tran.is_some() || t.tau_edge.is_some() || t.edge_wait.is_some()) {
            out.push(Violation::LocalWithEdgeFields {
                device: t.device,
                task: t.index,
            });
        }
        // generate-at-will: the next task starts only after this one resolves
        let previous = last_resolution[t.device];
        let expected = match previous {
            Some(r) => r + t.wait_before,
            None if first_task[t.device] => t.wait_before,
            None => {
                out.push(Violation::Overlap {
                    device: t.device,
                    task: t.index,
                });
                t.gen_time
            }
        };
        if (t.gen_time - expected).abs() > 1e-9 * expected.abs().max(1.0) {
            out.push(Violation::GenerationGap {
                device: t.device,
                task: t.index,
                expected,
                actual: t.gen_time,
            });
        }
        first_task[t.device] = false;
        last_resolution[t.device] = t.resolution_time();
    }
    out
}
