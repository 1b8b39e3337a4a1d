//! Deterministic simulator for the iFIND single-arm and dual-arm ultrasound robots.
//!
//! * [`kinematics`]: chain presets, forward kinematics, Jacobians, damped least-squares IK.
//! * [`surface`]: scanned-surface meshes, closest point, raycast, probe contact poses, sweeps.
//! * [`safety`]: contact force, force sensing, clutch trips and the safety supervisor.
//! * [`dual`]: the 17-DOF dual-arm rig, capsule clearance, dual IK and sweep planning.
//! * [`session`]: standard views, grading, session logs and study statistics.
//! * [`sim`]: the discrete-time simulation loop, wire protocol and scenario runner.

pub mod dual;
pub mod kinematics;
pub mod safety;
pub mod session;
pub mod sim;
pub mod surface;

pub use kinematics::{JointVector, KinematicChain, Pose};
