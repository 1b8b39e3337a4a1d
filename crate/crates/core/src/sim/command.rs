use std::fmt;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dual::Side;
use crate::kinematics::Pose;
use crate::safety::SafetyState;
use crate::session::{QuestionnaireResponse, ViewName};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    Idle,
    Jogging,
    MoveTo,
    Following,
    Fault,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Idle => "IDLE",
            Mode::Jogging => "JOGGING",
            Mode::MoveTo => "MOVE_TO",
            Mode::Following => "FOLLOWING",
            Mode::Fault => "FAULT",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Pose on the wire: position in m, unit quaternion as `[w, x, y, z]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WirePose {
    pub position: [f64; 3],
    pub quaternion: [f64; 4],
}

impl WirePose {
    /// `None` for a non-finite pose or a zero quaternion; otherwise renormalised.
    pub fn to_pose(&self) -> Option<Pose> {
        let [w, x, y, z] = self.quaternion;
        let q = Quaternion::new(w, x, y, z);
        let finite = self.position.iter().chain(&self.quaternion).all(|v| v.is_finite());
        if !finite || q.norm() < 1e-12 {
            return None;
        }
        Some(Pose::new(
            Vector3::from(self.position),
            UnitQuaternion::from_quaternion(q),
        ))
    }
}

impl From<&Pose> for WirePose {
    fn from(p: &Pose) -> Self {
        let q = p.orientation.quaternion();
        Self {
            position: p.position.into(),
            quaternion: [q.w, q.i, q.j, q.k],
        }
    }
}

/// What a command asks for. Lengths in m, angles in rad.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CommandKind {
    /// Move one joint by `delta` from its current (or currently jogged-to) value.
    Jog { joint: String, delta: f64 },
    /// Put a probe tip at `pose`; `arm` selects the probe on a dual rig.
    MoveTo {
        pose: WirePose,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        arm: Option<Side>,
    },
    /// Run a configured sweep path.
    FollowSweep { path: String },
    SetIndentation { indentation: f64 },
    Estop,
    Reset,
    Home,
    /// Grade the current acquisition against a standard view.
    Grade { view: ViewName },
    /// Append a questionnaire response to the session log.
    Questionnaire(QuestionnaireResponse),
}

impl CommandKind {
    pub fn name(&self) -> &'static str {
        match self {
            CommandKind::Jog { .. } => "jog",
            CommandKind::MoveTo { .. } => "move_to",
            CommandKind::FollowSweep { .. } => "follow_sweep",
            CommandKind::SetIndentation { .. } => "set_indentation",
            CommandKind::Estop => "estop",
            CommandKind::Reset => "reset",
            CommandKind::Home => "home",
            CommandKind::Grade { .. } => "grade",
            CommandKind::Questionnaire(_) => "questionnaire",
        }
    }

    /// Commands that move the robot and are therefore refused in FAULT.
    pub fn is_motion(&self) -> bool {
        matches!(
            self,
            CommandKind::Jog { .. } | CommandKind::MoveTo { .. } | CommandKind::FollowSweep { .. } | CommandKind::Home
        )
    }
}

/// Client to server.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Command {
    pub request_id: u64,
    #[serde(flatten)]
    pub kind: CommandKind,
}

impl Command {
    pub fn new(request_id: u64, kind: CommandKind) -> Self {
        Self { request_id, kind }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum CommandError {
    #[error("motion commands are rejected while in FAULT")]
    RejectedInFault,
    #[error("unknown joint `{0}`")]
    UnknownJoint(String),
    #[error("unknown sweep path `{0}`")]
    UnknownPath(String),
    #[error("target unreachable: {0}")]
    Unreachable(String),
    #[error("sweep planning failed at waypoint {index}: {reason}")]
    PlanFailed { index: usize, reason: String },
    #[error("{0}")]
    InvalidArgument(String),
}

impl CommandError {
    pub fn code(&self) -> &'static str {
        match self {
            CommandError::RejectedInFault => "rejected_in_fault",
            CommandError::UnknownJoint(_) => "unknown_joint",
            CommandError::UnknownPath(_) => "unknown_path",
            CommandError::Unreachable(_) => "unreachable",
            CommandError::PlanFailed { .. } => "plan_failed",
            CommandError::InvalidArgument(_) => "invalid_argument",
        }
    }
}

/// Outcome of one command, produced on the tick it is taken off the queue.
#[derive(Clone, Debug, PartialEq)]
pub struct Reply {
    pub request_id: u64,
    pub tick: u64,
    pub result: Result<(), CommandError>,
}

impl Reply {
    pub fn to_message(&self) -> ServerMessage {
        match &self.result {
            Ok(()) => ServerMessage::Ack {
                request_id: self.request_id,
                tick: self.tick,
            },
            Err(e) => ServerMessage::Error {
                request_id: Some(self.request_id),
                tick: Some(self.tick),
                code: e.code().to_string(),
                message: e.to_string(),
            },
        }
    }
}

/// Sweep progress in a telemetry frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepProgress {
    pub path: String,
    /// Index of the waypoint being approached.
    pub waypoint: usize,
    pub waypoints: usize,
}

/// State after one tick.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelemetryFrame {
    pub tick: u64,
    /// Simulated time, s.
    pub time: f64,
    pub mode: Mode,
    pub safety: SafetyState,
    pub cause: String,
    /// rad (revolute) or m (prismatic), in `joint_ids` order.
    pub joints: Vec<f64>,
    /// Probe tips, one per arm.
    pub tips: Vec<WirePose>,
    /// Sensed force per arm: normal, lateral x, lateral y, N.
    pub forces: Vec<[f64; 3]>,
    /// Joint loads from the tissue contact, N·m (revolute) or N (prismatic).
    pub loads: Vec<f64>,
    /// Joints whose clutch is disengaged.
    pub tripped: Vec<String>,
    /// Capsule clearance between the arms, m (dual rig only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clearance: Option<f64>,
    /// Capsule ids of the closest pair (dual rig only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<[String; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepProgress>,
}

/// A standard view as advertised to clients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewInfo {
    pub name: ViewName,
    pub label: String,
    pub pose: WirePose,
}

/// First line on every connection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hello {
    pub protocol: u32,
    pub robot: String,
    pub joint_ids: Vec<String>,
    /// s
    pub tick: f64,
    pub views: Vec<ViewInfo>,
    pub paths: Vec<String>,
}

pub const PROTOCOL_VERSION: u32 = 1;

/// Server to client.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello(Hello),
    Ack {
        request_id: u64,
        tick: u64,
    },
    Error {
        request_id: Option<u64>,
        tick: Option<u64>,
        code: String,
        message: String,
    },
    Telemetry(TelemetryFrame),
    /// `missed` frames were dropped for this subscriber before the next one.
    Gap {
        missed: u64,
    },
}

impl ServerMessage {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("server message serializes")
    }
}

/// Parse one client line.
pub fn parse_command(line: &str) -> Result<Command, String> {
    serde_json::from_str(line).map_err(|e| e.to_string())
}
