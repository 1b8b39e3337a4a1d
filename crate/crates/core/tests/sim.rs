use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::time::Duration;

use ifind_sim::kinematics::{KinematicChain, Pose};
use ifind_sim::safety::{contact_force, SafetyState};
use ifind_sim::session::{EventKind, SessionLog};
use ifind_sim::sim::*;
use ifind_sim::surface::{phantom, shapes::flat_patch};
use proptest::prelude::*;

const DT: f64 = 0.02;

fn v2() -> SimState {
    SimState::new(Robot::preset("ifind-v2").unwrap(), phantom(), SimConfig::default(), 1).unwrap()
}

fn jog(id: u64, joint: &str, delta: f64) -> Command {
    Command::new(
        id,
        CommandKind::Jog {
            joint: joint.into(),
            delta,
        },
    )
}

fn frames(log: &SessionLog) -> Vec<TelemetryFrame> {
    log.of_kind(EventKind::Telemetry)
        .map(|e| serde_json::from_value(e.payload.clone()).unwrap())
        .collect()
}

fn safety_events(log: &SessionLog) -> Vec<(u64, String)> {
    log.of_kind(EventKind::Safety)
        .map(|e| (e.tick, e.payload["state"].as_str().unwrap().to_string()))
        .collect()
}

/// Every joint moved at most its cap per tick, starting from `home`.
fn assert_rate_caps(state: &SimState, home: &[f64], frames: &[TelemetryFrame]) {
    let joints = state.robot().joints();
    let dt = state.config().tick;
    let mut prev = home.to_vec();
    for f in frames {
        for (i, j) in joints.iter().enumerate() {
            let step = j.delta(prev[i], f.joints[i]).abs();
            let cap = state.caps()[i] * dt;
            assert!(
                step <= cap * (1.0 + 1e-9) + 1e-15,
                "tick {}: {} moved {step} > {cap}",
                f.tick,
                j.id
            );
        }
        prev = f.joints.clone();
    }
}

fn assert_mode_matches_safety(frames: &[TelemetryFrame]) {
    let mut last = 0;
    for f in frames {
        assert!(f.tick > last, "tick not increasing at {}", f.tick);
        last = f.tick;
        assert_eq!(f.mode == Mode::Fault, f.safety.is_fault(), "tick {}: {} / {}", f.tick, f.mode, f.safety);
    }
}

#[test]
fn idle_step_only_advances_the_clock() {
    let mut s = v2();
    let home = s.joints().clone();
    for k in 1..=25u64 {
        let out = s.step(DT);
        assert_eq!(out.frame.tick, k);
        assert!(out.replies.is_empty());
        assert_eq!(out.events.len(), 1);
        assert_eq!(out.frame.mode, Mode::Idle);
        assert_eq!(out.frame.safety, SafetyState::Nominal);
        assert!(out.frame.tripped.is_empty());
    }
    assert_eq!(s.joints(), &home);
    assert!(s.target().is_none());
    assert!((s.time() - 25.0 * DT).abs() < 1e-12);
}

#[test]
fn jog_is_rate_limited() {
    let mut s = v2();
    s.submit(jog(1, "J4", 0.1));
    for k in 1..=10 {
        let out = s.step(DT);
        let j4 = out.frame.joints[3];
        assert!((j4 - 0.01 * k as f64).abs() < 1e-12, "tick {k}: {j4}");
        if k == 1 {
            assert_eq!(out.replies.len(), 1);
            assert!(out.replies[0].1.result.is_ok());
        }
        let expected = if k < 10 { Mode::Jogging } else { Mode::Idle };
        assert_eq!(out.frame.mode, expected);
        for (i, q) in out.frame.joints.iter().enumerate() {
            if i != 3 {
                assert_eq!(*q, 0.0);
            }
        }
    }
    assert_eq!(s.joints()[3], 0.1);
    assert_eq!(s.step(DT).frame.joints[3], 0.1);
}

#[test]
fn jog_rejects_unknown_joint_and_bad_delta() {
    let mut s = v2();
    s.submit(jog(1, "J9", 0.1));
    s.submit(jog(2, "J1", f64::NAN));
    let a = s.step(DT).replies;
    let b = s.step(DT).replies;
    assert_eq!(a[0].1.result.as_ref().unwrap_err().code(), "unknown_joint");
    assert_eq!(b[0].1.result.as_ref().unwrap_err().code(), "invalid_argument");
}

#[test]
fn estop_takes_effect_next_tick_and_blocks_motion() {
    let mut s = v2();
    s.submit(jog(1, "J1", 1.0));
    for _ in 0..5 {
        s.step(DT);
    }
    s.submit(Command::new(2, CommandKind::Estop));
    let out = s.step(DT);
    assert_eq!(out.frame.safety, SafetyState::Estop);
    assert_eq!(out.frame.mode, Mode::Fault);
    let held = out.frame.joints.clone();
    for _ in 0..5 {
        assert_eq!(s.step(DT).frame.joints, held);
    }

    s.submit(Command::new(
        3,
        CommandKind::MoveTo {
            pose: WirePose {
                position: [0.0, 0.0, 0.15],
                quaternion: [0.0, 1.0, 0.0, 0.0],
            },
            arm: None,
        },
    ));
    let out = s.step(DT);
    let err = out.replies[0].1.result.clone().unwrap_err();
    assert_eq!(err, CommandError::RejectedInFault);
    assert_eq!(err.code(), "rejected_in_fault");
    assert_eq!(out.frame.joints, held);

    s.submit(Command::new(4, CommandKind::Reset));
    let out = s.step(DT);
    assert_eq!(out.frame.safety, SafetyState::Nominal);
    assert_eq!(out.frame.mode, Mode::Idle);
    s.submit(Command::new(5, CommandKind::Home));
    let out = s.step(DT);
    assert!(out.replies[0].1.result.is_ok());
    assert_eq!(out.frame.mode, Mode::MoveTo);
}

#[test]
fn estop_bypasses_the_queue() {
    let mut s = v2();
    for id in 1..=3 {
        s.submit(jog(id, "J1", 0.1));
    }
    s.submit(Command::new(9, CommandKind::Estop));
    let out = s.step(DT);
    let ids: Vec<u64> = out.replies.iter().map(|(_, r)| r.request_id).collect();
    assert_eq!(ids, vec![1, 9]);
    assert!(out.replies.iter().all(|(_, r)| r.tick == 1 && r.result.is_ok()));
    assert_eq!(out.frame.safety, SafetyState::Estop);
    // The jog applied on the same tick never moves the arm.
    assert_eq!(out.frame.joints[0], 0.0);
    for (tick, id) in [(2, 2), (3, 3)] {
        let out = s.step(DT);
        assert_eq!(out.replies[0].1.request_id, id);
        assert_eq!(out.replies[0].1.tick, tick);
        assert_eq!(out.replies[0].1.result, Err(CommandError::RejectedInFault));
    }
}

/// Home probe 1 mm above a flat floor: a jog that drives J2 down hits it on
/// the same tick the jog is accepted.
#[test]
fn fault_wins_over_motion_on_the_same_tick() {
    let robot = Robot::preset("ifind-v2").unwrap();
    let home = robot.home();
    let tip = robot.tips(&home)[0].translation.vector;
    let floor = flat_patch(1.2, 4, tip.z - 0.001);
    let mut probe = home.clone();
    probe[1] += 0.01;
    let down = if robot.tips(&probe)[0].translation.vector.z < tip.z { 1.0 } else { -1.0 };

    let mut s = SimState::new(robot, floor, SimConfig::default(), 5).unwrap();
    s.submit(jog(1, "J2", 0.2 * down));
    let out = s.step(DT);
    assert!(out.replies[0].1.result.is_ok(), "the jog itself is accepted");
    assert_eq!(out.frame.safety, SafetyState::ClutchTripped);
    assert_eq!(out.frame.mode, Mode::Fault);
    assert_eq!(out.frame.tripped, vec!["J2".to_string()]);
    // No more jog motion: the next tick retracts instead.
    let out = s.step(DT);
    assert_eq!(out.frame.safety, SafetyState::Retracted);
    assert_eq!(out.frame.mode, Mode::Fault);
    let retract = KinematicChain::preset("ifind-v2").unwrap().retract_target(&out.frame.joints);
    assert_eq!(s.target(), if retract == *s.joints() { None } else { Some(&retract) });
}

#[test]
fn every_command_is_answered_within_queue_length_plus_one() {
    let mut s = v2();
    let mut pending = Vec::new();
    for id in 1..=6 {
        let waiting = s.queue_len() as u64;
        s.submit(jog(id, "J4", 0.02));
        pending.push((id, s.tick() + waiting + 1));
    }
    let mut answered = Vec::new();
    for _ in 0..10 {
        for (_, r) in s.step(DT).replies {
            answered.push((r.request_id, r.tick));
        }
    }
    assert_eq!(answered.len(), 6);
    for (id, deadline) in pending {
        let (_, tick) = answered.iter().find(|(i, _)| *i == id).unwrap();
        assert!(*tick <= deadline, "request {id} answered at {tick}, deadline {deadline}");
    }
}

#[test]
fn set_indentation_is_bounded() {
    let mut s = v2();
    s.submit(Command::new(1, CommandKind::SetIndentation { indentation: 0.004 }));
    s.submit(Command::new(2, CommandKind::SetIndentation { indentation: 0.5 }));
    assert!(s.step(DT).replies[0].1.result.is_ok());
    assert_eq!(s.step(DT).replies[0].1.result.as_ref().unwrap_err().code(), "invalid_argument");
    assert_eq!(s.indentation(), 0.004);
}

#[test]
fn unknown_sweep_path_is_an_error() {
    let mut s = v2();
    s.submit(Command::new(1, CommandKind::FollowSweep { path: "nope".into() }));
    let r = s.step(DT).replies;
    assert_eq!(r[0].1.result, Err(CommandError::UnknownPath("nope".into())));
}

#[test]
fn empty_scenario_logs_nominal_telemetry() {
    let sc = Scenario::from_toml_str("name = \"idle\"\nticks = 100\n[setup]\npreset = \"ifind-v2\"\n").unwrap();
    let log = sc.run(None).unwrap();
    assert_eq!(log.len(), 100);
    let f = frames(&log);
    assert_eq!(f.len(), 100);
    assert!(f.iter().all(|f| f.safety == SafetyState::Nominal && f.mode == Mode::Idle));
    assert_eq!(f.last().unwrap().tick, 100);
}

#[test]
fn scenario_errors() {
    assert!(matches!(Scenario::from_toml_str("name = "), Err(SimError::Parse(_))));
    let unknown = Scenario::from_toml_str("name = \"x\"\nticks = 1\n[setup]\npreset = \"ifind-v9\"\n").unwrap();
    assert_eq!(unknown.run(None).unwrap_err(), SimError::UnknownPreset("ifind-v9".into()));
    let late = "name = \"x\"\nticks = 5\n[setup]\npreset = \"ifind-v2\"\n[[command]]\ntick = 6\nkind = \"home\"\n";
    assert!(matches!(Scenario::from_toml_str(late), Err(SimError::InvalidConfig(_))));
    assert!(matches!(Scenario::bundled("nope"), Err(SimError::UnknownScenario(_))));
    let typo = "name = \"x\"\nticks = 5\n[setup]\npreset = \"ifind-v2\"\n[setup.sim]\ntik = 0.01\n";
    assert!(matches!(Scenario::from_toml_str(typo), Err(SimError::Parse(_))));
}

#[test]
fn scenario_runs_are_byte_identical() {
    for name in scenario_names() {
        let sc = Scenario::bundled(name).unwrap();
        let a = sc.run(None).unwrap().to_ndjson();
        let b = sc.run(None).unwrap().to_ndjson();
        assert!(a == b, "{name} is not deterministic");
    }
}

#[test]
fn sensor_noise_follows_the_seed() {
    let mut sc = Scenario::bundled("v2-surface-follow").unwrap();
    let a = sc.run(None).unwrap().to_ndjson();
    sc.setup.seed += 1;
    let b = sc.run(None).unwrap().to_ndjson();
    assert_ne!(a, b);
}

#[test]
fn run_scenario_from_file_with_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.toml");
    std::fs::write(&path, scenario_source("v2-clutch-trip").unwrap()).unwrap();
    let from_file = run_scenario(&path, None).unwrap();
    assert_eq!(from_file, Scenario::bundled("v2-clutch-trip").unwrap().run(None).unwrap());
    let mut reseeded = Scenario::bundled("v2-clutch-trip").unwrap();
    reseeded.setup.seed = 99;
    assert_eq!(run_scenario(&path, Some(99)).unwrap(), reseeded.run(None).unwrap());
    assert!(matches!(run_scenario(&dir.path().join("missing.toml"), None), Err(SimError::Io(_))));
}

#[test]
fn surface_follow_scenario_grades_every_stop_without_faults() {
    let sc = Scenario::bundled("v2-surface-follow").unwrap();
    let log = sc.run(None).unwrap();
    assert!(safety_events(&log).is_empty(), "{:?}", safety_events(&log));
    let grades = log.grades().unwrap();
    let state = sc.setup.build(None).unwrap();
    let mut graded: Vec<_> = grades.iter().map(|g| g.view).collect();
    let mut views: Vec<_> = state.views().iter().map(|v| v.name).collect();
    graded.sort();
    views.sort();
    assert_eq!(graded, views);
    assert!(grades.iter().all(|g| g.grade.as_str() == "good"), "{grades:?}");

    let f = frames(&log);
    assert!(f.iter().any(|f| f.mode == Mode::Following));
    let last = f.last().unwrap();
    assert_eq!(last.mode, Mode::Idle);
    assert!(last.sweep.is_none());
    assert_rate_caps(&state, &state.robot().home(), &f);
    assert_mode_matches_safety(&f);
}

#[test]
fn dual_sweep_scenario_keeps_the_arms_apart() {
    let sc = Scenario::bundled("v3-dual-sweep").unwrap();
    let log = sc.run(None).unwrap();
    assert!(safety_events(&log).is_empty(), "{:?}", safety_events(&log));
    let f = frames(&log);
    let margin = sc.setup.sim.margin;
    for frame in &f {
        let c = frame.clearance.expect("dual rig reports clearance");
        assert!(c >= margin, "tick {}: clearance {c}", frame.tick);
        assert_eq!(frame.tips.len(), 2);
    }
    assert!(f.iter().any(|f| f.forces.iter().all(|x| x[0] > 4.0)), "both probes touched down");
    assert_eq!(f.last().unwrap().mode, Mode::Idle);
    let state = sc.setup.build(None).unwrap();
    assert_rate_caps(&state, &state.robot().home(), &f);
}

/// Recompute contact, wrench and joint loads from the logged joints and check
/// the clutch trips on the first tick a load exceeds its threshold.
#[test]
fn clutch_trip_scenario_faults_on_the_exceedance_tick() {
    let sc = Scenario::bundled("v2-clutch-trip").unwrap();
    let log = sc.run(None).unwrap();
    let f = frames(&log);
    let robot = Robot::preset(&sc.setup.preset).unwrap();
    let mesh = sc.setup.load_mesh(None).unwrap();
    let params = sc.setup.sim.contact;
    let dt = sc.setup.sim.tick;
    let thresholds: Vec<Option<f64>> = robot.joints().iter().map(|j| j.clutch_threshold).collect();

    let mut prev = robot.home();
    let mut exceeded = None;
    for frame in &f {
        let kin = robot.kinematics(&frame.joints);
        let before = robot.tips(&prev);
        let mut wrenches = Vec::new();
        for (arm, (tip, _)) in kin.iter().enumerate() {
            let v = (tip.translation.vector - before[arm].translation.vector) / dt;
            wrenches.push(contact_force(&mesh, &Pose::from_isometry(tip), &params, &v).tip_wrench());
        }
        let jac: Vec<_> = kin.into_iter().map(|(_, j)| j).collect();
        let loads = Robot::loads(&jac, &wrenches);
        for (a, b) in loads.iter().zip(&frame.loads) {
            assert!((a - b).abs() < 1e-9, "tick {}: load {a} vs logged {b}", frame.tick);
        }
        let over = loads.iter().zip(&thresholds).any(|(l, t)| t.is_some_and(|t| l.abs() > t));
        if over {
            exceeded = Some(frame.tick);
            break;
        }
        prev = frame.joints.clone().into();
    }
    let exceeded = exceeded.expect("the scenario drives a load past its threshold");
    let events = safety_events(&log);
    assert_eq!(events[0].1, "CLUTCH_TRIPPED");
    assert!(events[0].0 >= exceeded && events[0].0 <= exceeded + 1);
    let at = &f[events[0].0 as usize - 1];
    assert_eq!(at.mode, Mode::Fault);
    assert_eq!(at.tripped, vec!["J2".to_string()]);
    assert_eq!(events[1], (events[0].0 + 1, "RETRACTED".to_string()));

    let rejected = log
        .of_kind(EventKind::Command)
        .find(|e| e.payload["kind"] == "move_to")
        .unwrap();
    assert_eq!(rejected.payload["error"], "rejected_in_fault");
    let state = sc.setup.build(None).unwrap();
    assert_rate_caps(&state, &state.robot().home(), &f);
    assert_mode_matches_safety(&f);
}

#[test]
fn bundled_scenarios_respect_rate_caps() {
    for name in scenario_names() {
        let sc = Scenario::bundled(name).unwrap();
        let state = sc.setup.build(None).unwrap();
        let f = frames(&sc.run(None).unwrap());
        assert_rate_caps(&state, &state.robot().home(), &f);
        assert_mode_matches_safety(&f);
    }
}

fn frame_at(tick: u64) -> std::sync::Arc<TelemetryFrame> {
    let mut s = v2();
    let mut out = s.step(DT).frame;
    out.tick = tick;
    std::sync::Arc::new(out)
}

#[test]
fn hub_drops_frames_for_a_full_subscriber_and_marks_the_gap() {
    let hub = Hub::default();
    let slow = hub.subscribe(4);
    let fast = hub.subscribe(64);
    for t in 1..=10 {
        hub.publish(frame_at(t));
    }
    let got: Vec<_> = slow.try_iter().collect();
    assert_eq!(got.len(), 4);
    hub.publish(frame_at(11));
    let mut seen = Vec::new();
    for item in got.into_iter().chain(slow.try_iter()) {
        seen.push(match item {
            StreamItem::Frame(f) => format!("f{}", f.tick),
            StreamItem::Gap { missed } => format!("gap{missed}"),
        });
    }
    assert_eq!(seen, ["f1", "f2", "f3", "f4", "gap6", "f11"]);
    assert_eq!(fast.try_iter().count(), 11);
    drop(slow);
    hub.publish(frame_at(12));
    assert_eq!(hub.subscribers(), 1);
}

#[test]
fn service_broadcasts_identical_frames_and_matches_a_direct_run() {
    let service = SimService::start(v2(), Pacing::Manual, LogSink::Memory).unwrap();
    let a = service.subscribe(1000);
    let b = service.subscribe(1000);
    let reply = service.submit(jog(1, "J4", 0.1));
    service.advance(50);
    let r = reply.recv_timeout(Duration::from_secs(10)).unwrap();
    assert_eq!((r.request_id, r.tick), (1, 1));
    let summary = service.shutdown().unwrap();
    assert_eq!(summary.state.tick(), 50);

    let fa: Vec<_> = a.try_iter().collect();
    let fb: Vec<_> = b.try_iter().collect();
    assert_eq!(fa.len(), 50);
    assert_eq!(fa, fb);

    let mut direct = v2();
    direct.submit(jog(1, "J4", 0.1));
    let mut log = SessionLog::new();
    for _ in 0..50 {
        for e in direct.step(DT).events {
            log.append(e).unwrap();
        }
    }
    assert_eq!(summary.log.unwrap().to_ndjson(), log.to_ndjson());
}

#[test]
fn service_writes_its_log_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("session.ndjson");
    let service = SimService::start(v2(), Pacing::Manual, LogSink::File(path.clone())).unwrap();
    service.advance(7);
    service.shutdown().unwrap();
    let log = ifind_sim::session::load_session(&path).unwrap();
    assert_eq!(log.len(), 7);
}

#[test]
fn tcp_round_trip() {
    let service = SimService::start(v2(), Pacing::Manual, LogSink::Discard).unwrap();
    let server = TcpServer::bind("127.0.0.1:0", service.handle()).unwrap().spawn().unwrap();
    let stream = TcpStream::connect(server.addr).unwrap();
    stream.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
    let mut out = stream.try_clone().unwrap();
    let mut lines = BufReader::new(stream).lines();
    let mut next = || -> ServerMessage { serde_json::from_str(&lines.next().unwrap().unwrap()).unwrap() };

    let ServerMessage::Hello(hello) = next() else {
        panic!("hello first")
    };
    assert_eq!(hello.protocol, PROTOCOL_VERSION);
    assert_eq!(hello.robot, "ifind-v2");
    assert_eq!(hello.joint_ids.len(), 8);
    assert_eq!(hello.views.len(), 7);

    writeln!(out, "{}", r#"{"request_id":1,"kind":"jog","joint":"J4","delta":0.1}"#).unwrap();
    writeln!(out, "{}", r#"{"request_id":2,"kind":"fly"}"#).unwrap();
    out.flush().unwrap();
    match next() {
        ServerMessage::Error { request_id, code, .. } => {
            assert_eq!(request_id, Some(2));
            assert_eq!(code, "parse");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
    service.advance(5);
    let mut acked = false;
    let mut ticks = Vec::new();
    while ticks.len() < 5 || !acked {
        match next() {
            ServerMessage::Ack { request_id, tick } => {
                assert_eq!((request_id, tick), (1, 1));
                acked = true;
            }
            ServerMessage::Telemetry(f) => ticks.push(f.tick),
            other => panic!("unexpected {other:?}"),
        }
    }
    assert_eq!(ticks, [1, 2, 3, 4, 5]);
    drop(out);
    server.stop();
    service.shutdown().unwrap();
}

#[test]
fn protocol_examples_parse() {
    let client = include_str!("../../../protocol/examples/client.ndjson");
    let mut kinds = Vec::new();
    for line in client.lines().filter(|l| !l.trim().is_empty()) {
        let cmd = parse_command(line).unwrap_or_else(|e| panic!("{line}: {e}"));
        let back: serde_json::Value = serde_json::to_value(&cmd).unwrap();
        assert_eq!(back, serde_json::from_str::<serde_json::Value>(line).unwrap());
        kinds.push(cmd.kind.name());
    }
    for k in ["jog", "move_to", "follow_sweep", "set_indentation", "estop", "reset", "home", "grade", "questionnaire"] {
        assert!(kinds.contains(&k), "no example for {k}");
    }

    let server = include_str!("../../../protocol/examples/server.ndjson");
    let mut types = Vec::new();
    for line in server.lines().filter(|l| !l.trim().is_empty()) {
        let msg: ServerMessage = serde_json::from_str(line).unwrap_or_else(|e| panic!("{line}: {e}"));
        types.push(serde_json::to_value(&msg).unwrap()["type"].as_str().unwrap().to_string());
    }
    for t in ["hello", "ack", "error", "telemetry", "gap"] {
        assert!(types.iter().any(|x| x == t), "no example for {t}");
    }
}

#[test]
fn serve_config_defaults() {
    let c = ServeConfig::from_toml_str("[setup]\npreset = \"ifind-v3\"\nseed = 4\n").unwrap();
    assert_eq!(c.port, DEFAULT_PORT);
    assert_eq!(c.host, "127.0.0.1");
    assert_eq!(c.setup.mesh, PHANTOM_MESH);
    assert!(c.setup.build(None).is_ok());
    assert!(ServeConfig::from_toml_str("port = 1\n").is_err());
}

fn arb_command() -> impl Strategy<Value = CommandKind> {
    let joints = ["J1", "J2", "J3", "J4", "J5", "J6", "J7", "J8"];
    prop_oneof![
        6 => (0..8usize, -2.0..2.0f64).prop_map(move |(j, d)| CommandKind::Jog {
            joint: joints[j].to_string(),
            delta: d
        }),
        1 => Just(CommandKind::Home),
        1 => Just(CommandKind::Estop),
        1 => Just(CommandKind::Reset),
        1 => (0.0..0.03f64).prop_map(|indentation| CommandKind::SetIndentation { indentation }),
        1 => Just(CommandKind::FollowSweep { path: "midline".into() }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn replayed_logs_respect_caps_and_liveness(
        commands in prop::collection::vec((0..80u64, arb_command()), 0..12)
    ) {
        let sc = Scenario::bundled("v2-clutch-trip").unwrap();
        let mut s = sc.setup.build(None).unwrap();
        let home = s.joints().clone();
        let mut commands = commands;
        commands.sort_by_key(|(t, _)| *t);
        let mut deadlines = std::collections::BTreeMap::new();
        let mut answered = std::collections::BTreeMap::new();
        let mut frames = Vec::new();
        let mut it = commands.into_iter().enumerate().peekable();
        for tick in 0..120u64 {
            while let Some((i, (_, kind))) = it.next_if(|(_, (t, _))| *t == tick) {
                let ahead = s.queue_len() as u64;
                let origin = s.submit(Command::new(i as u64, kind));
                deadlines.insert(origin, s.tick() + ahead + 1);
            }
            let out = s.step(DT);
            for (origin, r) in out.replies {
                answered.insert(origin, r.tick);
            }
            frames.push(out.frame);
        }
        for (origin, deadline) in &deadlines {
            let tick = answered.get(origin).copied();
            prop_assert!(tick.is_some_and(|t| t <= *deadline), "origin {origin}: {tick:?} > {deadline}");
        }
        assert_rate_caps(&s, &home, &frames);
        assert_mode_matches_safety(&frames);
    }
}
