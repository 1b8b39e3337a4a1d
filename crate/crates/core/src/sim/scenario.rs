use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::command::{Command, CommandKind};
use super::robot::Robot;
use super::state::{SimConfig, SimState};
use super::sweep::SweepSpec;
use super::SimError;
use crate::kinematics::KinematicsError;
use crate::session::SessionLog;
use crate::surface::{load_mesh, phantom, SurfaceMesh};

const SCENARIOS: &[(&str, &str)] = &[
    ("v2-surface-follow", include_str!("../../assets/scenarios/v2-surface-follow.toml")),
    ("v2-clutch-trip", include_str!("../../assets/scenarios/v2-clutch-trip.toml")),
    ("v3-dual-sweep", include_str!("../../assets/scenarios/v3-dual-sweep.toml")),
];

/// Mesh name that selects the bundled phantom instead of a file.
pub const PHANTOM_MESH: &str = "phantom";

pub fn scenario_names() -> impl Iterator<Item = &'static str> {
    SCENARIOS.iter().map(|(n, _)| *n)
}

pub fn scenario_source(name: &str) -> Option<&'static str> {
    SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Robot, surface and loop settings shared by scenarios and the service config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSetup {
    pub preset: String,
    /// `phantom` or a path to an OFF file, relative to the config file.
    #[serde(default = "phantom_name")]
    pub mesh: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub sweep: Vec<SweepSpec>,
}

fn phantom_name() -> String {
    PHANTOM_MESH.to_string()
}

impl SimSetup {
    pub fn load_mesh(&self, base: Option<&Path>) -> Result<SurfaceMesh, SimError> {
        if self.mesh == PHANTOM_MESH {
            return Ok(phantom());
        }
        let path = match base {
            Some(dir) => dir.join(&self.mesh),
            None => PathBuf::from(&self.mesh),
        };
        Ok(load_mesh(path)?)
    }

    /// Fresh state at tick 0; relative mesh paths resolve against `base`.
    pub fn build(&self, base: Option<&Path>) -> Result<SimState, SimError> {
        let robot = Robot::preset(&self.preset).map_err(|e| match e {
            KinematicsError::UnknownPreset(name) => SimError::UnknownPreset(name),
            other => other.into(),
        })?;
        let mesh = self.load_mesh(base)?;
        SimState::new(robot, mesh, self.sim.clone(), self.seed)?.with_sweeps(&self.sweep)
    }
}

/// `ifind serve` configuration: a `[setup]` table plus where to listen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeConfig {
    #[serde(default = "default_host")]
    pub host: String,
    #[serde(default = "default_port")]
    pub port: u16,
    pub setup: SimSetup,
}

pub const DEFAULT_PORT: u16 = 7878;

fn default_host() -> String {
    "127.0.0.1".to_string()
}

fn default_port() -> u16 {
    DEFAULT_PORT
}

impl ServeConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Listen on this preset with the bundled phantom.
    pub fn for_preset(preset: &str) -> Self {
        Self {
            host: default_host(),
            port: DEFAULT_PORT,
            setup: SimSetup {
                preset: preset.to_string(),
                mesh: phantom_name(),
                seed: 0,
                sim: SimConfig::default(),
                sweep: Vec::new(),
            },
        }
    }
}

/// A command submitted just before tick `tick` runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedCommand {
    pub tick: u64,
    /// Defaults to the command's position in the list, from 1.
    #[serde(default)]
    pub request_id: Option<u64>,
    #[serde(flatten)]
    pub kind: CommandKind,
}

/// A headless session: setup plus a timed command list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Number of ticks to run.
    pub ticks: u64,
    pub setup: SimSetup,
    #[serde(default)]
    pub command: Vec<TimedCommand>,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let s: Self = toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        if let Some(c) = s.command.iter().find(|c| c.tick == 0 || c.tick > s.ticks) {
            return Err(SimError::InvalidConfig(format!(
                "command at tick {} is outside 1..={}",
                c.tick, s.ticks
            )));
        }
        Ok(s)
    }

    pub fn bundled(name: &str) -> Result<Self, SimError> {
        let text = scenario_source(name).ok_or_else(|| SimError::UnknownScenario(name.to_string()))?;
        Self::from_toml_str(text)
    }

    /// Run every tick and collect the session log. Relative mesh paths resolve against `base`.
    pub fn run(&self, base: Option<&Path>) -> Result<SessionLog, SimError> {
        let mut sim = self.setup.build(base)?;
        let dt = self.setup.sim.tick;
        let mut commands: Vec<(u64, Command)> = self
            .command
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let id = c.request_id.unwrap_or(i as u64 + 1);
                (c.tick, Command::new(id, c.kind.clone()))
            })
            .collect();
        commands.sort_by_key(|(t, _)| *t);
        let mut pending = commands.into_iter().peekable();
        let mut log = SessionLog::new();
        for tick in 1..=self.ticks {
            while let Some((_, cmd)) = pending.next_if(|(t, _)| *t == tick) {
                sim.submit(cmd);
            }
            for event in sim.step(dt).events {
                log.append(event)?;
            }
        }
        Ok(log)
    }
}

/// Parse and run a scenario file; `seed` overrides the file's seed.
pub fn run_scenario(path: &Path, seed: Option<u64>) -> Result<SessionLog, SimError> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
    let mut scenario = Scenario::from_toml_str(&text)?;
    if let Some(s) = seed {
        scenario.setup.seed = s;
    }
    scenario.run(path.parent())
}
