use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::command::{
    Command, CommandError, CommandKind, Hello, Mode, Reply, SweepProgress, TelemetryFrame, ViewInfo,
    WirePose, PROTOCOL_VERSION,
};
use super::robot::Robot;
use super::sweep::{SweepDef, SweepSpec};
use super::SimError;
use crate::kinematics::{JointKind, JointVector, Pose};
use crate::safety::{
    contact_force, sense, supervisor_step, ClutchState, ContactParams, OperatorInput, SafetyLimits,
    SafetyState, SafetyStatus, SensorModel, SensorReading,
};
use crate::session::{grade_acquisition, standard_views, EventKind, Operator, SessionEvent, StandardView, ViewName};
use crate::surface::SurfaceMesh;

/// Loop parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Tick length, s.
    pub tick: f64,
    /// Velocity cap for revolute joints, rad/s.
    pub revolute_rate: f64,
    /// Velocity cap for prismatic joints, m/s.
    pub prismatic_rate: f64,
    /// Per-joint cap overrides by joint id.
    pub rates: BTreeMap<String, f64>,
    /// Initial probe indentation for sweeps, m.
    pub indentation: f64,
    /// Height above the first and last waypoint for approach and retreat, m.
    pub approach: f64,
    /// Arm clearance for dual moves and sweeps, m.
    pub margin: f64,
    pub contact: ContactParams,
    pub sensor: SensorModel,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            tick: 0.02,
            revolute_rate: 0.5,
            prismatic_rate: 0.05,
            rates: BTreeMap::new(),
            indentation: 0.005,
            approach: 0.05,
            margin: 0.02,
            contact: ContactParams::default(),
            sensor: SensorModel::default(),
        }
    }
}

/// Deepest indentation a command may request, m.
pub const MAX_INDENTATION: f64 = 0.03;
/// Relative slack when snapping onto a target.
const SNAP_RTOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
struct Waypoint {
    joints: JointVector,
    /// (arm, view) graded on arrival.
    stops: Vec<(usize, ViewName)>,
}

#[derive(Clone, Debug, PartialEq)]
struct ActiveSweep {
    id: String,
    waypoints: Vec<Waypoint>,
    next: usize,
}

#[derive(Clone, Debug, PartialEq)]
struct Queued {
    origin: u64,
    command: Command,
}

/// Everything one tick produced.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput {
    pub frame: TelemetryFrame,
    /// Session events of this tick, telemetry last.
    pub events: Vec<SessionEvent>,
    /// Replies with the origin handle returned by [`SimState::submit`].
    pub replies: Vec<(u64, Reply)>,
}

/// The authoritative simulation state.
#[derive(Clone, Debug)]
pub struct SimState {
    robot: Arc<Robot>,
    mesh: Arc<SurfaceMesh>,
    views: Arc<Vec<StandardView>>,
    sweeps: Arc<BTreeMap<String, SweepDef>>,
    config: SimConfig,
    limits: SafetyLimits,
    caps: Vec<f64>,
    seed: u64,
    q: JointVector,
    target: Option<JointVector>,
    mode: Mode,
    safety: SafetyStatus,
    clutch: ClutchState,
    sweep: Option<ActiveSweep>,
    indentation: f64,
    tick: u64,
    time: f64,
    queue: VecDeque<Queued>,
    next_origin: u64,
}

impl SimState {
    /// Robot at home, IDLE, NOMINAL, tick 0.
    pub fn new(robot: Robot, mesh: SurfaceMesh, config: SimConfig, seed: u64) -> Result<Self, SimError> {
        if !(config.tick > 0.0 && config.tick.is_finite()) {
            return Err(SimError::InvalidConfig(format!("tick {} must be positive", config.tick)));
        }
        let ids = robot.joint_ids();
        for id in config.rates.keys() {
            if !ids.contains(id) {
                return Err(SimError::InvalidConfig(format!("rate for unknown joint {id}")));
            }
        }
        let caps: Vec<f64> = robot
            .joints()
            .iter()
            .zip(&ids)
            .map(|(j, id)| {
                config.rates.get(id).copied().unwrap_or(match j.kind {
                    JointKind::Revolute => config.revolute_rate,
                    JointKind::Prismatic => config.prismatic_rate,
                })
            })
            .collect();
        if let Some(c) = caps.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
            return Err(SimError::InvalidConfig(format!("joint rate {c} must be positive")));
        }
        if !(0.0..=MAX_INDENTATION).contains(&config.indentation) {
            return Err(SimError::InvalidConfig(format!("indentation {} out of range", config.indentation)));
        }
        let views = standard_views(&mesh);
        Ok(Self {
            limits: robot.safety_limits(),
            q: robot.home(),
            clutch: ClutchState::engaged(robot.dof()),
            robot: Arc::new(robot),
            mesh: Arc::new(mesh),
            views: Arc::new(views),
            sweeps: Arc::new(BTreeMap::new()),
            indentation: config.indentation,
            config,
            caps,
            seed,
            target: None,
            mode: Mode::Idle,
            safety: SafetyStatus::nominal(),
            sweep: None,
            tick: 0,
            time: 0.0,
            queue: VecDeque::new(),
            next_origin: 0,
        })
    }

    /// Register sweep paths.
    pub fn with_sweeps(mut self, specs: &[SweepSpec]) -> Result<Self, SimError> {
        let mut sweeps = BTreeMap::new();
        for spec in specs {
            let def = spec.resolve(self.robot.arms(), &self.mesh, &self.views)?;
            if sweeps.insert(def.id.clone(), def).is_some() {
                return Err(SimError::InvalidConfig(format!("duplicate sweep {}", spec.id)));
            }
        }
        self.sweeps = Arc::new(sweeps);
        Ok(self)
    }

    pub fn robot(&self) -> &Robot {
        &self.robot
    }

    pub fn mesh(&self) -> &SurfaceMesh {
        &self.mesh
    }

    pub fn views(&self) -> &[StandardView] {
        &self.views
    }

    pub fn sweep_ids(&self) -> Vec<String> {
        self.sweeps.keys().cloned().collect()
    }

    pub fn sweep_def(&self, id: &str) -> Option<&SweepDef> {
        self.sweeps.get(id)
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// Per-joint velocity caps, rad/s or m/s.
    pub fn caps(&self) -> &[f64] {
        &self.caps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn joints(&self) -> &JointVector {
        &self.q
    }

    pub fn target(&self) -> Option<&JointVector> {
        self.target.as_ref()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn safety(&self) -> &SafetyStatus {
        &self.safety
    }

    pub fn clutch(&self) -> &ClutchState {
        &self.clutch
    }

    pub fn indentation(&self) -> f64 {
        self.indentation
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn hello(&self) -> Hello {
        Hello {
            protocol: PROTOCOL_VERSION,
            robot: self.robot.name().to_string(),
            joint_ids: self.robot.joint_ids(),
            tick: self.config.tick,
            views: self
                .views
                .iter()
                .map(|v| ViewInfo {
                    name: v.name,
                    label: v.name.label().to_string(),
                    pose: WirePose::from(&v.target.probe_pose()),
                })
                .collect(),
            paths: self.sweep_ids(),
        }
    }

    /// Queue a command; the returned handle tags its reply.
    pub fn submit(&mut self, command: Command) -> u64 {
        let origin = self.next_origin;
        self.next_origin += 1;
        self.queue.push_back(Queued { origin, command });
        origin
    }

    /// The next FIFO command, then every pending estop. Estops bypass the
    /// queue so they land on the next tick and never delay other commands.
    fn take_commands(&mut self) -> Vec<Queued> {
        let (estops, rest): (VecDeque<_>, VecDeque<_>) = self
            .queue
            .drain(..)
            .partition(|q| q.command.kind == CommandKind::Estop);
        self.queue = rest;
        let mut out: Vec<Queued> = self.queue.pop_front().into_iter().collect();
        out.extend(estops);
        out
    }

    /// Advance one tick of length `dt`.
    ///
    /// Order: apply the next queued command and any pending estop, move joints toward the target under
    /// the rate caps, evaluate contact, sensor, joint loads, clutches and the
    /// supervisor at the new configuration, settle the mode (a fault
    /// overrides whatever the command asked for), handle sweep arrival and
    /// grading, then emit the frame.
    ///
    /// # Panics
    /// If `dt` is not positive and finite.
    pub fn step(&mut self, dt: f64) -> StepOutput {
        assert!(dt > 0.0 && dt.is_finite(), "tick length must be positive");
        self.tick += 1;
        self.time += dt;
        let tick = self.tick;
        let mut events = Vec::new();
        let mut replies = Vec::new();
        let mut operator = None;
        let mut grades: Vec<(usize, ViewName)> = Vec::new();

        for Queued { origin, command } in self.take_commands() {
            let mut extra = Vec::new();
            let result = self.apply(&command.kind, &mut operator, &mut grades, &mut extra);
            events.push(command_event(tick, &command, &result));
            events.extend(extra);
            replies.push((
                origin,
                Reply {
                    request_id: command.request_id,
                    tick,
                    result,
                },
            ));
        }

        let before = self.robot.tips(&self.q);
        let reached = self.advance(dt);
        let kin = self.robot.kinematics(&self.q);

        let mut readings = Vec::with_capacity(kin.len());
        let mut wrenches = Vec::with_capacity(kin.len());
        for (arm, (tip, _)) in kin.iter().enumerate() {
            let velocity = (tip.translation.vector - before[arm].translation.vector) / dt;
            let force = contact_force(&self.mesh, &Pose::from_isometry(tip), &self.config.contact, &velocity);
            wrenches.push(force.tip_wrench());
            readings.push(sense(&force, &self.config.sensor, arm_seed(self.seed, arm), tick));
        }
        let jacobians: Vec<_> = kin.iter().map(|(_, j)| j.clone()).collect();
        let loads = Robot::loads(&jacobians, &wrenches);
        self.clutch = self.robot.update_clutch(&self.clutch, &loads, tick);
        let next = supervisor_step(&self.safety, &worst_reading(&readings), &self.clutch, &self.limits, operator);
        if next.state != self.safety.state {
            events.push(SessionEvent::new(
                tick,
                EventKind::Safety,
                serde_json::json!({"state": next.state, "from": self.safety.state, "cause": next.cause}),
            ));
        }
        self.safety = next;

        if self.safety.state.is_fault() {
            self.mode = Mode::Fault;
            self.sweep = None;
            self.target = None;
            if self.safety.state == SafetyState::Retracted {
                let t = self.robot.retract_target(&self.q, &self.clutch, &self.limits);
                if t != self.q {
                    self.target = Some(t);
                }
            }
        } else {
            if self.mode == Mode::Fault {
                self.mode = Mode::Idle;
            }
            if reached {
                self.arrive(&mut grades);
            }
        }

        let tips: Vec<Pose> = kin.iter().map(|(t, _)| Pose::from_isometry(t)).collect();
        for (arm, name) in grades {
            if let Some(view) = self.views.iter().find(|v| v.name == name) {
                let record = grade_acquisition(view, &tips[arm], readings[arm].normal(), Operator::Robot, tick);
                events.push(SessionEvent::grade(&record));
            }
        }

        let separation = self.robot.separation(&self.q);
        let ids = &self.limits.joint_ids;
        let frame = TelemetryFrame {
            tick,
            time: self.time,
            mode: self.mode,
            safety: self.safety.state,
            cause: self.safety.cause.clone(),
            joints: self.q.to_vec(),
            tips: tips.iter().map(WirePose::from).collect(),
            forces: readings.iter().map(SensorReading::forces).collect(),
            loads,
            tripped: self.clutch.tripped().into_iter().map(|i| ids[i].clone()).collect(),
            clearance: separation.as_ref().map(|s| s.min_distance),
            witness: separation.map(|s| [s.witness_ids.0, s.witness_ids.1]),
            sweep: self.sweep.as_ref().map(|s| SweepProgress {
                path: s.id.clone(),
                waypoint: s.next,
                waypoints: s.waypoints.len(),
            }),
        };
        events.push(SessionEvent::new(tick, EventKind::Telemetry, &frame));
        StepOutput { frame, events, replies }
    }

    /// Move toward the target along a straight joint-space line, every joint
    /// arriving together and the most constrained one at its cap; true when
    /// the target was reached on this tick.
    fn advance(&mut self, dt: f64) -> bool {
        let Some(target) = &self.target else {
            return false;
        };
        let joints = self.robot.joints();
        let deltas: Vec<f64> = joints
            .iter()
            .enumerate()
            .map(|(i, j)| j.delta(self.q[i], target[i]))
            .collect();
        let fraction = deltas
            .iter()
            .zip(&self.caps)
            .filter(|(d, _)| **d != 0.0)
            .map(|(d, cap)| cap * dt / d.abs())
            .fold(f64::INFINITY, f64::min);
        if fraction * (1.0 + SNAP_RTOL) >= 1.0 {
            self.q = target.clone();
            self.target = None;
            return true;
        }
        for (i, joint) in joints.iter().enumerate() {
            self.q[i] = joint.bound(self.q[i] + fraction * deltas[i]);
        }
        false
    }

    fn arrive(&mut self, grades: &mut Vec<(usize, ViewName)>) {
        match self.mode {
            Mode::Jogging | Mode::MoveTo => self.mode = Mode::Idle,
            Mode::Following => {
                let Some(sweep) = &mut self.sweep else {
                    self.mode = Mode::Idle;
                    return;
                };
                grades.extend(sweep.waypoints[sweep.next].stops.iter().copied());
                sweep.next += 1;
                match sweep.waypoints.get(sweep.next) {
                    Some(w) => self.target = Some(w.joints.clone()),
                    None => {
                        self.sweep = None;
                        self.mode = Mode::Idle;
                    }
                }
            }
            Mode::Idle | Mode::Fault => {}
        }
    }

    fn apply(
        &mut self,
        kind: &CommandKind,
        operator: &mut Option<OperatorInput>,
        grades: &mut Vec<(usize, ViewName)>,
        extra: &mut Vec<SessionEvent>,
    ) -> Result<(), CommandError> {
        if self.mode == Mode::Fault && kind.is_motion() {
            return Err(CommandError::RejectedInFault);
        }
        match kind {
            CommandKind::Estop => {
                *operator = Some(OperatorInput::Estop);
                self.stop();
            }
            CommandKind::Reset => {
                *operator = Some(OperatorInput::Reset);
                self.clutch = ClutchState::engaged(self.robot.dof());
                self.stop();
                self.mode = Mode::Idle;
            }
            CommandKind::Home => {
                let home = self.robot.home();
                self.start(Mode::MoveTo, home);
            }
            CommandKind::Jog { joint, delta } => {
                let ids = self.robot.joint_ids();
                let i = ids
                    .iter()
                    .position(|id| id == joint)
                    .ok_or_else(|| CommandError::UnknownJoint(joint.clone()))?;
                if !delta.is_finite() {
                    return Err(CommandError::InvalidArgument(format!("jog delta {delta} is not finite")));
                }
                let mut t = match (&self.target, self.mode) {
                    (Some(t), Mode::Jogging) => t.clone(),
                    _ => self.q.clone(),
                };
                t[i] = self.robot.joints()[i].bound(t[i] + delta);
                self.start(Mode::Jogging, t);
            }
            CommandKind::MoveTo { pose, arm } => {
                let pose = pose
                    .to_pose()
                    .ok_or_else(|| CommandError::InvalidArgument("pose is not finite or has a zero quaternion".into()))?;
                let a = self
                    .robot
                    .arm_index(*arm)
                    .ok_or_else(|| CommandError::InvalidArgument("this robot has a single arm".into()))?;
                let mut targets: Vec<Pose> = self.robot.tips(&self.q).iter().map(Pose::from_isometry).collect();
                targets[a] = pose;
                let q = self.robot.solve(&targets, &self.q, self.config.margin)?;
                self.start(Mode::MoveTo, q);
            }
            CommandKind::FollowSweep { path } => {
                let sweeps = self.sweeps.clone();
                let def = sweeps
                    .get(path)
                    .ok_or_else(|| CommandError::UnknownPath(path.clone()))?;
                let waypoints = self.plan_sweep(def)?;
                let first = waypoints[0].joints.clone();
                self.start(Mode::Following, first);
                self.sweep = Some(ActiveSweep {
                    id: def.id.clone(),
                    waypoints,
                    next: 0,
                });
            }
            CommandKind::SetIndentation { indentation } => {
                if !(0.0..=MAX_INDENTATION).contains(indentation) {
                    return Err(CommandError::InvalidArgument(format!(
                        "indentation {indentation} m outside [0, {MAX_INDENTATION}]"
                    )));
                }
                self.indentation = *indentation;
            }
            CommandKind::Grade { view } => {
                let v = self
                    .views
                    .iter()
                    .find(|v| v.name == *view)
                    .ok_or_else(|| CommandError::InvalidArgument(format!("view {} is not loaded", view.key())))?;
                let goal = v.target.probe_pose().position;
                let arm = self
                    .robot
                    .tips(&self.q)
                    .iter()
                    .map(|t| (t.translation.vector - goal).norm())
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .map_or(0, |(i, _)| i);
                grades.push((arm, *view));
            }
            CommandKind::Questionnaire(response) => {
                response
                    .validate()
                    .map_err(|e| CommandError::InvalidArgument(e.to_string()))?;
                extra.push(SessionEvent::questionnaire(self.tick, response));
            }
        }
        Ok(())
    }

    fn stop(&mut self) {
        self.target = None;
        self.sweep = None;
        if self.mode != Mode::Fault {
            self.mode = Mode::Idle;
        }
    }

    fn start(&mut self, mode: Mode, target: JointVector) {
        self.sweep = None;
        self.mode = mode;
        self.target = Some(target);
    }

    /// Approach above the first waypoint, the path itself, then retreat above the last.
    fn plan_sweep(&self, def: &SweepDef) -> Result<Vec<Waypoint>, CommandError> {
        let paths = def.at_indentation(self.indentation);
        let lift = |k: usize, h: f64| -> Vec<Pose> {
            paths
                .iter()
                .map(|p| {
                    let w = &p.waypoints[k];
                    let pose = w.probe_pose();
                    Pose::new(w.surface_point + w.normal * h, pose.orientation)
                })
                .collect()
        };
        let h = self.config.approach;
        let approach = self.robot.solve(&lift(0, h), &self.q, self.config.margin)?;
        let path = self.robot.plan(&paths, &approach, self.config.margin)?;
        // Retreat is best effort: near the edge of the workspace a shorter lift,
        // or none, still leaves the probe resting on the surface.
        let last = path.last().expect("non-empty path");
        let retreat = [h, 0.5 * h]
            .iter()
            .find_map(|&hh| self.robot.solve(&lift(def.len() - 1, hh), last, self.config.margin).ok());
        let mut out = vec![Waypoint {
            joints: approach,
            stops: Vec::new(),
        }];
        for (k, joints) in path.into_iter().enumerate() {
            let stops = def
                .paths
                .iter()
                .enumerate()
                .filter_map(|(arm, p)| p.stops[k].map(|v| (arm, v)))
                .collect();
            out.push(Waypoint { joints, stops });
        }
        if let Some(joints) = retreat {
            out.push(Waypoint {
                joints,
                stops: Vec::new(),
            });
        }
        Ok(out)
    }
}

/// Right-arm sensor noise comes from a separate stream.
fn arm_seed(seed: u64, arm: usize) -> u64 {
    seed ^ (arm as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Largest normal force and largest lateral force across the arms, so the
/// supervisor trips if any one probe exceeds a limit.
fn worst_reading(readings: &[SensorReading]) -> SensorReading {
    let mut out = readings[0];
    if let Some(n) = readings.iter().max_by_key(|r| r.counts[0]) {
        out.counts[0] = n.counts[0];
    }
    if let Some(l) = readings
        .iter()
        .max_by(|a, b| a.lateral_magnitude().total_cmp(&b.lateral_magnitude()))
    {
        out.counts[1] = l.counts[1];
        out.counts[2] = l.counts[2];
    }
    out
}

fn command_event(tick: u64, command: &Command, result: &Result<(), CommandError>) -> SessionEvent {
    let mut payload = serde_json::to_value(command).expect("command serializes");
    if let Value::Object(map) = &mut payload {
        match result {
            Ok(()) => {
                map.insert("result".into(), "ack".into());
            }
            Err(e) => {
                map.insert("result".into(), "error".into());
                map.insert("error".into(), e.code().into());
                map.insert("message".into(), e.to_string().into());
            }
        }
    }
    SessionEvent::new(tick, EventKind::Command, payload)
}
