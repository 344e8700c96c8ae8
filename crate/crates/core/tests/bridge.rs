use std::net::TcpListener;
use std::thread;

use agemec::aoi::CostMode;
use agemec::bridge::*;
use agemec::sim::{
    run_with_policies, Action, DecisionKind, DecisionPoint, Horizon, Observation, SchedulingPolicy, SimConfig,
    Simulation,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(devices: usize, seed: u64) -> SimConfig {
    SimConfig {
        num_devices: devices,
        seed,
        ..SimConfig::default()
    }
}

fn zero_wait_local(d: &Decision) -> (Option<f64>, Option<usize>) {
    match d.kind {
        DecisionKind::Updating => (Some(0.0), None),
        DecisionKind::Offloading => (None, Some(0)),
    }
}

/// Deterministic in the decision contents, so the same rule can drive both
/// the remote client and a local replay.
fn hashed_action(device: usize, task: u64, kind: DecisionKind, z_max: f64, edges: usize) -> Action {
    let mut rng = ChaCha8Rng::seed_from_u64(task * 31 + device as u64);
    match kind {
        DecisionKind::Updating => Action::Wait(rng.gen_range(0.0..z_max)),
        DecisionKind::Offloading => Action::Route(rng.gen_range(0..=edges)),
    }
}

fn to_wire(a: Action) -> (Option<f64>, Option<usize>) {
    match a {
        Action::Wait(z) => (Some(z), None),
        Action::Route(x) => (None, Some(x)),
    }
}

fn serve_in_background(session: Session) -> (String, thread::JoinHandle<Result<Session, BridgeError>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let handle = thread::spawn(move || {
        let mut session = session;
        serve_tcp(&mut session, listener)?;
        Ok(session)
    });
    (addr, handle)
}

fn local_replay<F>(cfg: SimConfig, plan: &SessionPlan, rule: F) -> agemec::sim::EpisodeLog
where
    F: Fn(&DecisionPoint) -> Action + Clone + 'static,
{
    let mut cfg = cfg;
    cfg.horizon = Horizon::Tasks(plan.episodes as u64 * plan.steps);
    let mut policies: Vec<Box<dyn SchedulingPolicy>> = (0..cfg.num_devices)
        .map(|_| {
            let r = rule.clone();
            Box::new(move |dp: &DecisionPoint| r(dp)) as Box<dyn SchedulingPolicy>
        })
        .collect();
    run_with_policies(Simulation::build(cfg).unwrap(), &mut policies).unwrap()
}

#[test]
fn loopback_matches_local_run() {
    let plan = SessionPlan {
        episodes: 1,
        steps: 100,
        ..SessionPlan::default()
    };
    let session = Session::new(config(1, 11), plan, vec![None]).unwrap();
    let (addr, server) = serve_in_background(session);
    let transcript = Client::connect(addr.as_str()).unwrap().run(vec![], zero_wait_local).unwrap();
    let session = server.join().unwrap().unwrap();

    let log = local_replay(config(1, 11), &plan, |dp| match dp.kind() {
        DecisionKind::Updating => Action::Wait(0.0),
        DecisionKind::Offloading => Action::Route(0),
    });
    assert_eq!(session.simulation().log().hash(), log.hash());
    let oracle = experiences_from_log(&log, &plan, &[0]).unwrap();
    assert!(oracle.experiences.len() >= 2 * 90);
    assert_eq!(
        canonical_experiences(&transcript.experiences()),
        canonical_experiences(&oracle.experiences)
    );
    let updates = transcript.gamma_updates();
    assert_eq!(updates.len(), 1);
    assert_eq!(updates[0].gamma, oracle.gamma_updates[0].gamma);
}

#[test]
fn two_devices_interleaved_in_time_order() {
    let plan = SessionPlan {
        episodes: 3,
        steps: 40,
        initial_gamma: 1.0,
        ..SessionPlan::default()
    };
    let cfg = config(2, 5);
    let (z_max, edges) = (cfg.z_max, cfg.num_edges);
    let session = Session::new(cfg.clone(), plan, vec![None, None]).unwrap();
    let (addr, server) = serve_in_background(session);
    let transcript = Client::connect(addr.as_str())
        .unwrap()
        .run(vec![0, 1], |d| to_wire(hashed_action(d.device, d.task, d.kind, z_max, edges)))
        .unwrap();
    server.join().unwrap().unwrap();

    for device in 0..2 {
        let times: Vec<f64> = transcript
            .received()
            .filter_map(|m| match m {
                Message::Decision(d) if d.device == device => Some(d.time),
                _ => None,
            })
            .collect();
        assert!(times.windows(2).all(|w| w[0] <= w[1]));
        let tasks: Vec<u64> = transcript
            .experiences()
            .iter()
            .filter(|e| e.device == device)
            .map(|e| e.task)
            .collect();
        assert!(tasks.windows(2).all(|w| w[0] <= w[1]));
        let episodes: Vec<usize> = transcript
            .gamma_updates()
            .iter()
            .filter(|g| g.device == device)
            .map(|g| g.episode)
            .collect();
        assert_eq!(episodes, vec![0, 1, 2]);
    }
    let seqs: Vec<u64> = transcript.received().map(Message::seq).collect();
    assert!(seqs.windows(2).all(|w| w[0] < w[1]));

    let log = local_replay(cfg, &plan, move |dp| hashed_action(dp.device, dp.task, dp.kind(), z_max, edges));
    let oracle = experiences_from_log(&log, &plan, &[0, 1]).unwrap();
    assert_eq!(
        canonical_experiences(&transcript.experiences()),
        canonical_experiences(&oracle.experiences)
    );
    let mut got = transcript.gamma_updates();
    for g in &mut got {
        g.seq = 0;
    }
    let mut want = oracle.gamma_updates.clone();
    got.sort_by_key(|g| (g.device, g.episode));
    want.sort_by_key(|g| (g.device, g.episode));
    assert_eq!(got, want);
    // costs use the quotient of the episode they fall in
    for e in transcript.experiences() {
        let g = if e.episode == 0 {
            1.0
        } else {
            want.iter()
                .find(|g| g.device == e.device && g.episode + 1 == e.episode)
                .unwrap()
                .gamma
        };
        assert_eq!(e.gamma, g);
    }
}

#[test]
fn separate_connections_per_device() {
    let plan = SessionPlan {
        episodes: 2,
        steps: 25,
        cost_mode: CostMode::Ratio,
        ..SessionPlan::default()
    };
    let session = Session::new(config(2, 9), plan, vec![None, None]).unwrap();
    let (addr, server) = serve_in_background(session);
    let clients: Vec<_> = (0..2)
        .map(|d| {
            let addr = addr.clone();
            thread::spawn(move || Client::connect(addr.as_str()).unwrap().run(vec![d], zero_wait_local).unwrap())
        })
        .collect();
    let transcripts: Vec<Transcript> = clients.into_iter().map(|h| h.join().unwrap()).collect();
    server.join().unwrap().unwrap();
    for (d, t) in transcripts.iter().enumerate() {
        assert!(t.received().all(|m| m.device() == d), "device {d} got foreign messages");
        assert_eq!(t.gamma_updates().len(), 2);
        assert!(t.experiences().iter().all(|e| e.cost > 0.0));
    }
}

#[test]
fn stdio_session_over_buffers() {
    // a scripted client replayed through serve_stream
    let plan = SessionPlan {
        episodes: 1,
        steps: 3,
        ..SessionPlan::default()
    };
    let mut session = Session::new(config(1, 1), plan, vec![None]).unwrap();
    let mut out = Vec::new();
    let hello = r#"{"type":"hello","seq":0,"device":0,"episode":0,"protocol":1}"#;
    let err = serve_stream(&mut session, std::io::Cursor::new(format!("{hello}\n")), &mut out);
    assert!(matches!(err, Err(BridgeError::Disconnected)));
    let text = String::from_utf8(out).unwrap();
    let msgs: Vec<Message> = text.lines().map(|l| decode(l.as_bytes()).unwrap()).collect();
    assert!(matches!(msgs[0], Message::Hello(_)));
    assert!(matches!(msgs[1], Message::EpisodeBegin(_)));
    assert!(matches!(
        &msgs[2],
        Message::Decision(Decision {
            state: Observation::PrevDelay(y),
            ..
        }) if *y == 0.0
    ));
}

#[test]
fn unreachable_endpoint_is_a_connect_error() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    drop(listener);
    let mut session = Session::new(config(1, 0), SessionPlan::default(), vec![None]).unwrap();
    assert!(matches!(serve_connect(&mut session, &addr), Err(BridgeError::Connect { .. })));
}
