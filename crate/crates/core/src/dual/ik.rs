use nalgebra::{DMatrix, DVector, Isometry3};
use serde::{Deserialize, Serialize};

use super::rig::{DualArmRig, RigState, Side};
use super::DualError;
use crate::kinematics::{cap_step, dls_step, pose_error, residual_of, IkOptions, JointVector, Pose, Residual};

/// Dual-target solver settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DualIkOptions {
    pub max_iterations: usize,
    pub damping: f64,
    pub position_tolerance: f64,
    pub orientation_tolerance: f64,
    /// Cap on the norm of the task step, rad or m.
    pub max_step: f64,
    /// Required capsule clearance, m.
    pub margin: f64,
    /// Repulsion starts this far above the margin, m.
    pub buffer: f64,
    /// Gain on the projected repulsion gradient.
    pub repulsion_gain: f64,
    /// Cap on the norm of the repulsion step.
    pub max_repulsion_step: f64,
}

impl Default for DualIkOptions {
    fn default() -> Self {
        Self {
            max_iterations: 400,
            damping: 0.05,
            position_tolerance: 1e-6,
            orientation_tolerance: 1e-6,
            max_step: 0.2,
            margin: 0.02,
            buffer: 0.005,
            repulsion_gain: 20.0,
            max_repulsion_step: 0.05,
        }
    }
}

impl DualIkOptions {
    pub fn with_margin(margin: f64) -> Self {
        Self {
            margin,
            ..Self::default()
        }
    }

    fn single(&self) -> IkOptions {
        IkOptions {
            max_iterations: self.max_iterations,
            damping: self.damping,
            position_tolerance: self.position_tolerance,
            orientation_tolerance: self.orientation_tolerance,
            max_step: self.max_step,
            restarts: 0,
        }
    }
}

/// Singular values below this are treated as zero when forming the nullspace projector.
const RANK_TOL: f64 = 1e-9;

/// Solve both tip targets at once, keeping the arms at least `opts.margin` apart.
///
/// Each iteration takes a damped least-squares step on the stacked 12-row task
/// and adds the negative gradient of `sum max(0, margin + buffer - d)^2` over
/// capsule pairs, projected into the nullspace of the stacked Jacobian so it
/// does not disturb the tips to first order.
pub fn solve_dual_ik(
    rig: &DualArmRig,
    target_left: &Pose,
    target_right: &Pose,
    seed: &[f64],
    opts: &DualIkOptions,
) -> Result<JointVector, DualError> {
    rig.check(seed)?;
    if !(opts.margin.is_finite() && opts.margin >= 0.0) {
        return Err(DualError::InvalidArgument(format!(
            "clearance margin {} must be non-negative",
            opts.margin
        )));
    }
    let targets = [target_left.to_isometry(), target_right.to_isometry()];
    let first = run(rig, &targets, JointVector::from(seed), opts, true);
    if let Outcome::Done(q) = first {
        return Ok(q);
    }
    // The repulsion can keep the tips from settling when the margin cannot be
    // met; polish the tips alone to tell that apart from a real failure.
    let Outcome::Failed(start) = first else { unreachable!() };
    let second = run(rig, &targets, start.q.clone(), opts, false);
    match second {
        Outcome::Done(q) => Ok(q),
        Outcome::Failed(b) => {
            let on_target = [&start, &b]
                .into_iter()
                .filter(|c| c.on_target)
                .max_by(|x, y| x.clearance.total_cmp(&y.clearance));
            match on_target {
                Some(c) => Err(DualError::ClearanceInfeasible {
                    best: c.q.clone(),
                    residual: c.residual,
                    clearance: c.clearance,
                }),
                None => {
                    let c = if b.score < start.score { b } else { start };
                    Err(DualError::NotConverged {
                        best: c.q,
                        residual: c.residual,
                        clearance: c.clearance,
                    })
                }
            }
        }
    }
}

struct Candidate {
    q: JointVector,
    residual: [Residual; 2],
    clearance: f64,
    on_target: bool,
    score: f64,
}

enum Outcome {
    Done(JointVector),
    /// Best on-target iterate (most clearance) if any, else the lowest-score one.
    Failed(Candidate),
}

fn run(
    rig: &DualArmRig,
    targets: &[Isometry3<f64>; 2],
    mut q: JointVector,
    opts: &DualIkOptions,
    repel: bool,
) -> Outcome {
    let single = opts.single();
    let mut best: Option<Candidate> = None;
    for iteration in 0..=opts.max_iterations {
        let state = rig.state(&q);
        let (err, residual) = task_error(&state, targets);
        let sep = rig.separation_at(&state);
        let on_target = residual.iter().all(|r| r.within(&single));
        if on_target && sep.min_distance >= opts.margin {
            return Outcome::Done(q);
        }
        let score = residual.iter().map(|r| r.position + r.orientation).sum::<f64>()
            + (opts.margin - sep.min_distance).max(0.0);
        let better = match &best {
            None => true,
            Some(b) if on_target => !b.on_target || sep.min_distance > b.clearance,
            Some(b) => !b.on_target && score < b.score,
        };
        if better {
            best = Some(Candidate {
                q: q.clone(),
                residual,
                clearance: sep.min_distance,
                on_target,
                score,
            });
        }
        if iteration == opts.max_iterations {
            break;
        }
        let jac = stacked_jacobian(rig, &state);
        let mut step = clamped_task_step(rig, &q, jac.clone(), &err, opts);
        if repel {
            let mut push = repulsion_step(rig, &state, &sep, &jac, opts);
            cap_step(&mut push, opts.max_repulsion_step);
            step += push;
        }
        for (v, d) in q.iter_mut().zip(step.iter()) {
            *v += d;
        }
        rig.bound(&mut q);
    }
    Outcome::Failed(best.expect("at least one iterate"))
}

fn task_error(state: &RigState, targets: &[Isometry3<f64>; 2]) -> (DVector<f64>, [Residual; 2]) {
    let mut err = DVector::zeros(12);
    let mut residual = [Residual::default(); 2];
    for side in Side::BOTH {
        let e = pose_error(state.tip(side), &targets[side.index()]);
        residual[side.index()] = residual_of(e.as_slice());
        err.rows_mut(6 * side.index(), 6).copy_from(&e);
    }
    (err, residual)
}

fn stacked_jacobian(rig: &DualArmRig, state: &RigState) -> DMatrix<f64> {
    let mut jac = DMatrix::zeros(12, rig.dof());
    for side in Side::BOTH {
        jac.rows_mut(6 * side.index(), 6)
            .copy_from(&rig.tip_jacobian(state, side));
    }
    jac
}

/// Damped step that locks joints which would leave their range and re-solves.
fn clamped_task_step(
    rig: &DualArmRig,
    q: &[f64],
    mut jac: DMatrix<f64>,
    err: &DVector<f64>,
    opts: &DualIkOptions,
) -> DVector<f64> {
    let mut locked = vec![false; q.len()];
    loop {
        let mut step = dls_step(&jac, err, opts.damping);
        cap_step(&mut step, opts.max_step);
        let mut changed = false;
        for (i, joint) in rig.joints().enumerate() {
            if locked[i] || joint.is_continuous() {
                continue;
            }
            let next = q[i] + step[i];
            if next < joint.limits[0] || next > joint.limits[1] {
                locked[i] = true;
                jac.column_mut(i).fill(0.0);
                changed = true;
            }
        }
        if !changed || locked.iter().all(|&l| l) {
            return step;
        }
    }
}

/// `-gain * N * grad P` with `N` the exact nullspace projector of `jac`.
fn repulsion_step(
    rig: &DualArmRig,
    state: &RigState,
    sep: &super::SeparationReport,
    jac: &DMatrix<f64>,
    opts: &DualIkOptions,
) -> DVector<f64> {
    let n = rig.dof();
    let reach = opts.margin + opts.buffer;
    let mut grad = DVector::zeros(n);
    let mut active = false;
    for pair in sep.pairs.iter().filter(|p| p.distance < reach) {
        let [pl, pr] = pair.points;
        let gap = pl - pr;
        let len = gap.norm();
        if len == 0.0 {
            continue;
        }
        let normal = gap / len;
        let caps = &rig.capsules.capsules;
        let jl = rig.point_jacobian(state, Side::Left, caps[pair.left].frame, &pl);
        let jr = rig.point_jacobian(state, Side::Right, caps[pair.right].frame, &pr);
        let dd = (jl - jr).transpose() * normal;
        grad -= dd * (2.0 * (reach - pair.distance));
        active = true;
    }
    if !active {
        return DVector::zeros(n);
    }
    let svd = jac.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut projected = grad.clone();
    for (k, &sigma) in svd.singular_values.iter().enumerate() {
        if sigma > RANK_TOL {
            let row = v_t.row(k).transpose();
            let c = row.dot(&grad);
            projected -= row * c;
        }
    }
    projected * -opts.repulsion_gain
}
