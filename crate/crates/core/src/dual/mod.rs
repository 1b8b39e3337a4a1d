//! The two-arm rig: gantry plus two arms, capsule clearance, dual IK and sweep planning.

mod capsule;
mod ik;
mod plan;
mod rig;

pub use capsule::{
    min_separation, point_segment_distance, segment_distance, Capsule, CapsuleConfig, CapsuleSet,
    PairDistance, SeparationReport, WorldCapsule,
};
pub use ik::{solve_dual_ik, DualIkOptions};
pub use plan::{plan_dual_sweep, PlanOptions, Trajectory, TrajectoryPoint};
pub use rig::{
    assemble_rig, rig_preset_names, rig_preset_source, BaseOffsets, DualArmRig, RigConfig,
    RigState, Side,
};

use thiserror::Error;

use crate::kinematics::{JointVector, KinematicsError, Residual};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DualError {
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("{0}")]
    InvalidArgument(String),
    #[error(
        "dual IK did not converge (left {:.3e} m / {:.3e} rad, right {:.3e} m / {:.3e} rad, clearance {clearance:.4} m)",
        residual[0].position, residual[0].orientation, residual[1].position, residual[1].orientation
    )]
    NotConverged {
        best: JointVector,
        residual: [Residual; 2],
        clearance: f64,
    },
    #[error("targets reached but best clearance is {clearance:.4} m")]
    ClearanceInfeasible {
        best: JointVector,
        residual: [Residual; 2],
        clearance: f64,
    },
    #[error("joint {joint} moves {step:.4} between waypoints, above {max}")]
    StepTooLarge { joint: String, step: f64, max: f64 },
    #[error("paths have {left} and {right} waypoints")]
    WaypointMismatch { left: usize, right: usize },
    #[error("plan failed at waypoint {index}: {reason}")]
    PlanFailed {
        index: usize,
        partial: Trajectory,
        reason: Box<DualError>,
    },
}
