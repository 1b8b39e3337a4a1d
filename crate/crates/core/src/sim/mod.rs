//! Discrete-time simulation loop, wire protocol, scenario runner and TCP service.

mod command;
mod robot;
mod scenario;
mod service;
mod state;
mod sweep;

pub use command::{
    parse_command, Command, CommandError, CommandKind, Hello, Mode, Reply, ServerMessage,
    SweepProgress, TelemetryFrame, ViewInfo, WirePose, PROTOCOL_VERSION,
};
pub use robot::Robot;
pub use scenario::{
    run_scenario, scenario_names, scenario_source, Scenario, ServeConfig, SimSetup, TimedCommand, DEFAULT_PORT,
    PHANTOM_MESH,
};
pub use service::{
    serve_connection, Hub, LogSink, Pacing, ServiceHandle, ServiceSummary, SimService, StreamItem,
    TcpServer, TcpServerHandle, CLIENT_BUFFER,
};
pub use state::{SimConfig, SimState, StepOutput, MAX_INDENTATION};
pub use sweep::{PathSpec, ResolvedPath, SweepDef, SweepSpec, Via};

use thiserror::Error;

use crate::kinematics::KinematicsError;
use crate::session::SessionError;
use crate::surface::SurfaceError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("{0}")]
    Io(String),
}
