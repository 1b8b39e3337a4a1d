use nalgebra::{DMatrix, DVector, Isometry3, Vector6};

use super::command::CommandError;
use crate::dual::{
    plan_dual_sweep, rig_preset_source, solve_dual_ik, DualArmRig, DualError, DualIkOptions,
    PlanOptions, SeparationReport, Side,
};
use crate::kinematics::{
    preset_source, solve_ik, ChainState, IkOptions, JointSpec, JointVector, KinematicChain,
    KinematicsError, Pose,
};
use crate::safety::{update_clutch, ClutchState, SafetyLimits};
use crate::surface::SweepPath;

/// The simulated hardware: one arm or the gantry-mounted pair.
#[derive(Clone, Debug)]
pub enum Robot {
    Single(KinematicChain),
    Dual(DualArmRig),
}

impl Robot {
    /// Rig presets first, then chain presets.
    pub fn preset(name: &str) -> Result<Self, KinematicsError> {
        if rig_preset_source(name).is_some() {
            return Ok(Robot::Dual(DualArmRig::preset(name)?));
        }
        if preset_source(name).is_some() {
            return Ok(Robot::Single(KinematicChain::preset(name)?));
        }
        Err(KinematicsError::UnknownPreset(name.to_string()))
    }

    pub fn name(&self) -> &str {
        match self {
            Robot::Single(c) => &c.name,
            Robot::Dual(r) => &r.name,
        }
    }

    pub fn dof(&self) -> usize {
        match self {
            Robot::Single(c) => c.dof(),
            Robot::Dual(r) => r.dof(),
        }
    }

    /// Number of probes.
    pub fn arms(&self) -> usize {
        match self {
            Robot::Single(_) => 1,
            Robot::Dual(_) => 2,
        }
    }

    pub fn joints(&self) -> Vec<&JointSpec> {
        match self {
            Robot::Single(c) => c.joints.iter().collect(),
            Robot::Dual(r) => r.joints().collect(),
        }
    }

    pub fn joint_ids(&self) -> Vec<String> {
        match self {
            Robot::Single(c) => c.joints.iter().map(|j| j.id.clone()).collect(),
            Robot::Dual(r) => r.joint_ids(),
        }
    }

    pub fn home(&self) -> JointVector {
        match self {
            Robot::Single(c) => c.home(),
            Robot::Dual(r) => r.home(),
        }
    }

    pub fn check(&self, q: &[f64]) -> Result<(), KinematicsError> {
        match self {
            Robot::Single(c) => c.check(q),
            Robot::Dual(r) => r.check(q),
        }
    }

    /// Arm index for a requested side; a single arm only answers to `None` or left.
    pub fn arm_index(&self, side: Option<Side>) -> Option<usize> {
        match (self, side) {
            (_, None) => Some(0),
            (Robot::Single(_), Some(Side::Left)) => Some(0),
            (Robot::Single(_), Some(Side::Right)) => None,
            (Robot::Dual(_), Some(s)) => Some(s.index()),
        }
    }

    /// Tip frames and 6 x dof tip Jacobians, one per arm (no limit check).
    pub fn kinematics(&self, q: &[f64]) -> Vec<(Isometry3<f64>, DMatrix<f64>)> {
        match self {
            Robot::Single(c) => {
                let s = ChainState::evaluate(c, &Isometry3::identity(), q);
                let j = s.tip_jacobian();
                vec![(*s.tip(), DMatrix::from_iterator(6, c.dof(), j.iter().copied()))]
            }
            Robot::Dual(r) => {
                let s = r.state(q);
                Side::BOTH
                    .iter()
                    .map(|&side| (*s.tip(side), r.tip_jacobian(&s, side)))
                    .collect()
            }
        }
    }

    pub fn tips(&self, q: &[f64]) -> Vec<Isometry3<f64>> {
        match self {
            Robot::Single(c) => vec![*ChainState::evaluate(c, &Isometry3::identity(), q).tip()],
            Robot::Dual(r) => {
                let s = r.state(q);
                Side::BOTH.iter().map(|&side| *s.tip(side)).collect()
            }
        }
    }

    /// Capsule clearance between the arms; `None` for a single arm.
    pub fn separation(&self, q: &[f64]) -> Option<SeparationReport> {
        match self {
            Robot::Single(_) => None,
            Robot::Dual(r) => Some(r.separation_at(&r.state(q))),
        }
    }

    /// Joint loads `Σ Jᵀ w` for one tip wrench per arm.
    pub fn loads(jacobians: &[DMatrix<f64>], wrenches: &[Vector6<f64>]) -> Vec<f64> {
        let mut total = DVector::zeros(jacobians[0].ncols());
        for (j, w) in jacobians.iter().zip(wrenches) {
            total += j.transpose() * DVector::from_column_slice(w.as_slice());
        }
        total.iter().copied().collect()
    }

    /// Supervisor limits over the full joint vector.
    pub fn safety_limits(&self) -> SafetyLimits {
        match self {
            Robot::Single(c) => SafetyLimits::for_chain(c),
            Robot::Dual(r) => {
                let mut back_arm = Vec::new();
                for side in Side::BOTH {
                    let arm = r.arm(side);
                    let start = r.arm_range(side).start;
                    back_arm.extend(
                        r.safety
                            .back_arm
                            .iter()
                            .filter_map(|id| arm.joint_index(id))
                            .map(|i| start + i),
                    );
                }
                back_arm.sort_unstable();
                SafetyLimits {
                    soft_normal: r.safety.soft_normal,
                    soft_lateral: r.safety.soft_lateral,
                    back_arm,
                    joint_ids: r.joint_ids(),
                }
            }
        }
    }

    /// Clutch update over the full joint vector; the gantry has no clutch.
    pub fn update_clutch(&self, clutch: &ClutchState, loads: &[f64], tick: u64) -> ClutchState {
        match self {
            Robot::Single(c) => update_clutch(clutch, loads, c, tick),
            Robot::Dual(r) => {
                let mut next = clutch.clone();
                for side in Side::BOTH {
                    let range = r.arm_range(side);
                    let sub = ClutchState {
                        engaged: clutch.engaged[range.clone()].to_vec(),
                        trip_tick: clutch.trip_tick[range.clone()].to_vec(),
                    };
                    let sub = update_clutch(&sub, &loads[range.clone()], r.arm(side), tick);
                    next.engaged[range.clone()].copy_from_slice(&sub.engaged);
                    next.trip_tick[range].copy_from_slice(&sub.trip_tick);
                }
                next
            }
        }
    }

    /// Gas-spring retract pose: every arm with a tripped back-arm clutch moves
    /// its retract joints; everything else holds.
    pub fn retract_target(&self, q: &[f64], clutch: &ClutchState, limits: &SafetyLimits) -> JointVector {
        match self {
            Robot::Single(c) => c.retract_target(q),
            Robot::Dual(r) => {
                let mut out = JointVector::from(q);
                for side in Side::BOTH {
                    let range = r.arm_range(side);
                    let tripped = limits
                        .back_arm
                        .iter()
                        .any(|&i| range.contains(&i) && !clutch.engaged[i]);
                    if !tripped {
                        continue;
                    }
                    let arm = r.arm(side);
                    for (id, v) in &r.safety.retract {
                        if let Some(i) = arm.joint_index(id) {
                            out[range.start + i] = arm.joints[i].bound(*v);
                        }
                    }
                }
                out
            }
        }
    }

    /// Joint vector putting the tips at `targets` (one per arm), starting from
    /// `seed`; a dual rig also honours the clearance `margin`.
    pub fn solve(&self, targets: &[Pose], seed: &[f64], margin: f64) -> Result<JointVector, CommandError> {
        match self {
            Robot::Single(c) => solve_single(c, &targets[0], seed),
            Robot::Dual(r) => solve_dual_ik(r, &targets[0], &targets[1], seed, &DualIkOptions::with_margin(margin))
                .map_err(|e| CommandError::Unreachable(e.to_string())),
        }
    }

    /// Joint targets for each waypoint of `paths` (one path per arm), starting from `seed`.
    pub fn plan(&self, paths: &[SweepPath], seed: &[f64], margin: f64) -> Result<Vec<JointVector>, CommandError> {
        match self {
            Robot::Single(c) => {
                let mut out = Vec::with_capacity(paths[0].len());
                let mut previous = JointVector::from(seed);
                for (k, w) in paths[0].waypoints.iter().enumerate() {
                    let q = solve_single(c, &w.probe_pose(), &previous).map_err(|e| CommandError::PlanFailed {
                        index: k,
                        reason: e.to_string(),
                    })?;
                    previous = q.clone();
                    out.push(q);
                }
                Ok(out)
            }
            Robot::Dual(r) => {
                plan_dual_sweep(r, &paths[0], &paths[1], seed, &PlanOptions::with_margin(margin))
                    .map(|t| t.points.into_iter().map(|p| p.joints).collect())
                    .map_err(|e| match e {
                        DualError::PlanFailed { index, reason, .. } => CommandError::PlanFailed {
                            index,
                            reason: reason.to_string(),
                        },
                        other => CommandError::InvalidArgument(other.to_string()),
                    })
            }
        }
    }
}

/// Seeded solve first so the arm stays on its current branch; restarts only as a fallback.
fn solve_single(chain: &KinematicChain, target: &Pose, seed: &[f64]) -> Result<JointVector, CommandError> {
    let local = IkOptions {
        restarts: 0,
        ..IkOptions::default()
    };
    solve_ik(chain, target, seed, &local)
        .or_else(|_| solve_ik(chain, target, seed, &IkOptions::default()))
        .map_err(|e| CommandError::Unreachable(e.to_string()))
}
