use nalgebra::Vector6;
use serde::{Deserialize, Serialize};

use crate::kinematics::{JointVector, KinematicChain, KinematicsError};

/// Per-joint load from a tip wrench (force then moment, base frame): `Jᵀ w`.
/// Revolute entries are N·m, prismatic entries N.
pub fn joint_torques(
    chain: &KinematicChain,
    q: &[f64],
    wrench: &Vector6<f64>,
) -> Result<JointVector, KinematicsError> {
    let jac = chain.jacobian(q)?;
    Ok((jac.transpose() * wrench).iter().copied().collect())
}

/// Ball-spring clutch engagement per joint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClutchState {
    pub engaged: Vec<bool>,
    pub trip_tick: Vec<Option<u64>>,
}

impl ClutchState {
    pub fn engaged(n: usize) -> Self {
        Self {
            engaged: vec![true; n],
            trip_tick: vec![None; n],
        }
    }

    pub fn all_engaged(&self) -> bool {
        self.engaged.iter().all(|&e| e)
    }

    /// Indices of disengaged joints.
    pub fn tripped(&self) -> Vec<usize> {
        (0..self.engaged.len()).filter(|&i| !self.engaged[i]).collect()
    }
}

/// Trip every engaged joint whose `|load|` strictly exceeds its threshold, stamping `tick`.
/// Joints without a threshold never trip; disengaged joints stay disengaged.
///
/// # Panics
/// If `loads` or `state` do not match the chain's joint count.
pub fn update_clutch(
    state: &ClutchState,
    loads: &[f64],
    chain: &KinematicChain,
    tick: u64,
) -> ClutchState {
    assert_eq!(loads.len(), chain.dof(), "one load per joint");
    assert_eq!(state.engaged.len(), chain.dof(), "one clutch per joint");
    let mut next = state.clone();
    for (i, joint) in chain.joints.iter().enumerate() {
        if !next.engaged[i] {
            continue;
        }
        if let Some(limit) = joint.clutch_threshold {
            if loads[i].abs() > limit {
                next.engaged[i] = false;
                next.trip_tick[i] = Some(tick);
            }
        }
    }
    next
}
