//! Serial-chain kinematics for the bundled robot presets.
//!
//! Every joint is a fixed pre-transform followed by a single-variable motion
//! (rotation about or translation along its axis). Parallel-link arms are
//! expressed as pairs whose driver value counter-rotates a later joint frame.

mod chain;
mod fk;
mod ik;
mod pose;

pub use chain::{
    home, load_chain, preset_names, preset_source, wrap_angle, ChainConfig, ChainSource,
    JointConfig, JointKind, JointSpec, JointVector, KinematicChain, ParallelogramConfig,
    ParallelogramPair, LIMIT_EPS,
};
pub use fk::{forward_kinematics, jacobian, link_frames, ChainState};
pub use ik::{pose_error, solve_ik, solve_ik_in, IkOptions, Residual};
pub(crate) use ik::{cap_step, dls_step, residual_of};
pub use pose::{Pose, RigidTransform};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("invalid chain config: {0}")]
    InvalidConfig(String),
    #[error("joint {joint} value {value} outside [{min}, {max}]")]
    LimitViolation {
        joint: String,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("expected {expected} joint values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("IK did not converge (position residual {:.3e} m, orientation residual {:.3e} rad)", residual.position, residual.orientation)]
    NotConverged { best: JointVector, residual: Residual },
}
