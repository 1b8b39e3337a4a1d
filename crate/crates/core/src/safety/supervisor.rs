use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::clutch::ClutchState;
use super::sensor::SensorReading;
use crate::kinematics::KinematicChain;

/// Safety limits block of a chain or rig config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SafetyConfig {
    /// Soft normal-force limit, N.
    pub soft_normal: f64,
    /// Soft lateral-force limit, N.
    pub soft_lateral: f64,
    /// Joints whose clutch trip fires the gas-spring retract.
    pub back_arm: Vec<String>,
    /// Safe retract pose: joint id to value.
    pub retract: BTreeMap<String, f64>,
}

impl Default for SafetyConfig {
    fn default() -> Self {
        Self {
            soft_normal: 15.0,
            soft_lateral: 10.0,
            back_arm: Vec::new(),
            retract: BTreeMap::new(),
        }
    }
}

/// Resolved limits the supervisor checks against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SafetyLimits {
    pub soft_normal: f64,
    pub soft_lateral: f64,
    /// Joint indices (in the clutch state) that trigger retract.
    pub back_arm: Vec<usize>,
    /// Joint ids for messages, indexed like the clutch state.
    pub joint_ids: Vec<String>,
}

impl SafetyLimits {
    pub fn for_chain(chain: &KinematicChain) -> Self {
        Self {
            soft_normal: chain.safety.soft_normal,
            soft_lateral: chain.safety.soft_lateral,
            back_arm: chain.back_arm_indices(),
            joint_ids: chain.joints.iter().map(|j| j.id.clone()).collect(),
        }
    }

    fn name(&self, i: usize) -> String {
        self.joint_ids
            .get(i)
            .cloned()
            .unwrap_or_else(|| format!("joint {i}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SafetyState {
    Nominal,
    ForceLimit,
    ClutchTripped,
    Retracted,
    Estop,
}

impl SafetyState {
    pub const ALL: [SafetyState; 5] = [
        SafetyState::Nominal,
        SafetyState::ForceLimit,
        SafetyState::ClutchTripped,
        SafetyState::Retracted,
        SafetyState::Estop,
    ];

    /// States that put the simulation into FAULT.
    pub fn is_fault(self) -> bool {
        matches!(
            self,
            SafetyState::ClutchTripped | SafetyState::Retracted | SafetyState::Estop
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SafetyState::Nominal => "NOMINAL",
            SafetyState::ForceLimit => "FORCE_LIMIT",
            SafetyState::ClutchTripped => "CLUTCH_TRIPPED",
            SafetyState::Retracted => "RETRACTED",
            SafetyState::Estop => "ESTOP",
        }
    }
}

impl fmt::Display for SafetyState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafetyStatus {
    pub state: SafetyState,
    pub cause: String,
}

impl SafetyStatus {
    pub fn nominal() -> Self {
        Self {
            state: SafetyState::Nominal,
            cause: String::new(),
        }
    }

    fn to(state: SafetyState, cause: impl Into<String>) -> Self {
        Self {
            state,
            cause: cause.into(),
        }
    }
}

impl Default for SafetyStatus {
    fn default() -> Self {
        Self::nominal()
    }
}

/// Operator input to the supervisor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorInput {
    Estop,
    Reset,
}

/// One supervisor tick.
///
/// Precedence: operator estop, then operator reset (to NOMINAL from anywhere),
/// then the absorbing states (ESTOP, RETRACTED), then the clutch, then forces.
/// CLUTCH_TRIPPED moves to RETRACTED on the tick after entry when any tripped
/// joint is in the back-arm set; otherwise it holds.
pub fn supervisor_step(
    status: &SafetyStatus,
    reading: &SensorReading,
    clutch: &ClutchState,
    limits: &SafetyLimits,
    operator: Option<OperatorInput>,
) -> SafetyStatus {
    use SafetyState::*;
    match operator {
        Some(OperatorInput::Estop) => return SafetyStatus::to(Estop, "operator estop"),
        Some(OperatorInput::Reset) => return SafetyStatus::to(Nominal, "reset"),
        None => {}
    }
    let tripped = clutch.tripped();
    match status.state {
        Estop | Retracted => status.clone(),
        ClutchTripped => match tripped.iter().find(|i| limits.back_arm.contains(i)) {
            Some(&i) => SafetyStatus::to(
                Retracted,
                format!("gas-spring retract after {} clutch trip", limits.name(i)),
            ),
            None => status.clone(),
        },
        Nominal | ForceLimit => {
            if let Some(&i) = tripped.first() {
                return SafetyStatus::to(
                    ClutchTripped,
                    format!("{} clutch disengaged", limits.name(i)),
                );
            }
            let normal = reading.normal();
            let lateral = reading.lateral_magnitude();
            if normal > limits.soft_normal {
                SafetyStatus::to(
                    ForceLimit,
                    format!("normal force {normal:.2} N above {} N", limits.soft_normal),
                )
            } else if lateral > limits.soft_lateral {
                SafetyStatus::to(
                    ForceLimit,
                    format!("lateral force {lateral:.2} N above {} N", limits.soft_lateral),
                )
            } else {
                SafetyStatus::nominal()
            }
        }
    }
}
