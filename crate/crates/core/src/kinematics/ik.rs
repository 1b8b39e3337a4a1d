use nalgebra::{DMatrix, DVector, Isometry3, Matrix6, Matrix6xX, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::chain::{JointVector, KinematicChain};
use super::fk::ChainState;
use super::pose::Pose;
use super::KinematicsError;

/// Damped-least-squares solver settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IkOptions {
    pub max_iterations: usize,
    /// Damping factor (lambda); the solve uses lambda squared.
    pub damping: f64,
    pub position_tolerance: f64,
    pub orientation_tolerance: f64,
    /// Cap on the Euclidean norm of one joint step.
    pub max_step: f64,
    /// Extra attempts from fixed pseudo-random starts after the seeded one fails.
    pub restarts: usize,
}

impl Default for IkOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            damping: 0.05,
            position_tolerance: 1e-6,
            orientation_tolerance: 1e-6,
            max_step: 0.2,
            restarts: 4,
        }
    }
}

/// Remaining error after a solve attempt.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub position: f64,
    pub orientation: f64,
}

impl Residual {
    pub fn within(&self, opts: &IkOptions) -> bool {
        self.position < opts.position_tolerance && self.orientation < opts.orientation_tolerance
    }

    fn score(&self) -> f64 {
        self.position + self.orientation
    }
}

/// Task-space error from `current` to `target`: linear then angular (rotation vector), base frame.
pub fn pose_error(current: &Isometry3<f64>, target: &Isometry3<f64>) -> Vector6<f64> {
    let dp = target.translation.vector - current.translation.vector;
    let dr = (target.rotation * current.rotation.inverse()).scaled_axis();
    Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}

pub(crate) fn residual_of(err: &[f64]) -> Residual {
    let n = |s: &[f64]| s.iter().map(|v| v * v).sum::<f64>().sqrt();
    Residual {
        position: n(&err[0..3]),
        orientation: n(&err[3..6]),
    }
}

/// Damped pseudo-inverse applied to `err`: `J^T (J J^T + lambda^2 I)^-1 err`.
pub(crate) fn dls_step(jac: &DMatrix<f64>, err: &DVector<f64>, damping: f64) -> DVector<f64> {
    let rows = jac.nrows();
    let mut jjt = jac * jac.transpose();
    for i in 0..rows {
        jjt[(i, i)] += damping * damping;
    }
    let y = jjt
        .cholesky()
        .map(|c| c.solve(err))
        .unwrap_or_else(|| DVector::zeros(rows));
    jac.transpose() * y
}

/// Scale `step` down so its norm does not exceed `cap`.
pub(crate) fn cap_step(step: &mut DVector<f64>, cap: f64) {
    let norm = step.norm();
    if norm > cap {
        *step *= cap / norm;
    }
}

fn dls_step6(jac: &Matrix6xX<f64>, err: &Vector6<f64>, damping: f64) -> DVector<f64> {
    let mut jjt: Matrix6<f64> = jac * jac.transpose();
    for i in 0..6 {
        jjt[(i, i)] += damping * damping;
    }
    match jjt.cholesky() {
        Some(c) => jac.transpose() * c.solve(err),
        None => DVector::zeros(jac.ncols()),
    }
}

/// Damped step that locks joints which would be pushed past a limit, so the
/// remaining joints take up the task instead of stalling against the stop.
fn clamped_step(
    chain: &KinematicChain,
    q: &[f64],
    mut jac: Matrix6xX<f64>,
    err: &Vector6<f64>,
    opts: &IkOptions,
) -> DVector<f64> {
    let mut locked = vec![false; q.len()];
    loop {
        let mut step = dls_step6(&jac, err, opts.damping);
        cap_step(&mut step, opts.max_step);
        let mut changed = false;
        for (i, joint) in chain.joints.iter().enumerate() {
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

/// Solve for joint values placing the tip at `target`, starting from `seed`.
///
/// Each iteration takes a damped-least-squares step, caps its norm, then
/// projects every joint back into range (wrapping full-turn joints).
/// If the attempt from `seed` fails, up to `opts.restarts` further attempts
/// run from fixed pseudo-random configurations, so the result depends only on
/// the inputs. On failure the best iterate and its residual travel in the error.
pub fn solve_ik(
    chain: &KinematicChain,
    target: &Pose,
    seed: &[f64],
    opts: &IkOptions,
) -> Result<JointVector, KinematicsError> {
    chain.check(seed)?;
    solve_ik_in(chain, &Isometry3::identity(), target, seed, opts)
}

/// As [`solve_ik`] for a chain whose base sits at `base` in the world frame.
pub fn solve_ik_in(
    chain: &KinematicChain,
    base: &Isometry3<f64>,
    target: &Pose,
    seed: &[f64],
    opts: &IkOptions,
) -> Result<JointVector, KinematicsError> {
    let target = target.to_isometry();
    let mut best = match attempt(chain, base, &target, JointVector::from(seed), opts) {
        Ok(q) => return Ok(q),
        Err(b) => b,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(RESTART_SEED);
    for _ in 0..opts.restarts {
        let start: JointVector = chain
            .joints
            .iter()
            .map(|j| rng.random_range(j.limits[0]..=j.limits[1]))
            .collect();
        match attempt(chain, base, &target, start, opts) {
            Ok(q) => return Ok(q),
            Err(b) if b.1.score() < best.1.score() => best = b,
            Err(_) => {}
        }
    }
    Err(KinematicsError::NotConverged {
        best: best.0,
        residual: best.1,
    })
}

const RESTART_SEED: u64 = 0x1f1d;

fn attempt(
    chain: &KinematicChain,
    base: &Isometry3<f64>,
    target: &Isometry3<f64>,
    mut q: JointVector,
    opts: &IkOptions,
) -> Result<JointVector, (JointVector, Residual)> {
    let mut best = (q.clone(), Residual::default());
    let mut best_score = f64::INFINITY;
    for iteration in 0..=opts.max_iterations {
        let state = ChainState::evaluate(chain, base, &q);
        let err = pose_error(state.tip(), target);
        let residual = residual_of(err.as_slice());
        if residual.within(opts) {
            return Ok(q);
        }
        if residual.score() < best_score {
            best_score = residual.score();
            best = (q.clone(), residual);
        }
        if iteration == opts.max_iterations {
            break;
        }
        let step = clamped_step(chain, &q, state.tip_jacobian(), &err, opts);
        for (v, d) in q.iter_mut().zip(step.iter()) {
            *v += d;
        }
        chain.bound(&mut q);
    }
    Err(best)
}

impl KinematicChain {
    pub fn solve_ik(
        &self,
        target: &Pose,
        seed: &[f64],
        opts: &IkOptions,
    ) -> Result<JointVector, KinematicsError> {
        solve_ik(self, target, seed, opts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{UnitQuaternion, Vector3};

    #[test]
    fn fixed_point_returns_seed_unchanged() {
        let chain = KinematicChain::preset("ifind-v2").unwrap();
        let q0 = [0.3, 0.5, -0.4, 1.0, 0.6, 0.1, -0.2, 0.8];
        let target = chain.forward_kinematics(&q0).unwrap();
        let q = solve_ik(&chain, &target, &q0, &IkOptions::default()).unwrap();
        assert_eq!(q.as_slice(), q0);
    }

    #[test]
    fn perturbed_home_target_is_reached() {
        let chain = KinematicChain::preset("ifind-v2").unwrap();
        let home = chain.forward_kinematics(&chain.home()).unwrap();
        let target = Pose::new(
            home.position + Vector3::new(0.03, -0.05, -0.04),
            UnitQuaternion::from_euler_angles(0.1, -0.15, 0.2) * home.orientation,
        );
        let q = solve_ik(&chain, &target, &chain.home(), &IkOptions::default()).unwrap();
        let reached = chain.forward_kinematics(&q).unwrap();
        let (dp, dr) = reached.error_to(&target);
        assert!(dp < 1e-6 && dr < 1e-6, "{dp} {dr}");
    }

    #[test]
    fn far_target_reports_best_iterate() {
        let chain = KinematicChain::preset("ifind-v2").unwrap();
        let target = Pose::new(Vector3::new(10.0, 0.0, 0.0), UnitQuaternion::identity());
        match solve_ik(&chain, &target, &chain.home(), &IkOptions::default()) {
            Err(KinematicsError::NotConverged { best, residual }) => {
                chain.check(&best).unwrap();
                assert!(residual.position > 8.0);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn seed_outside_limits_is_rejected() {
        let chain = KinematicChain::preset("ifind-v2").unwrap();
        let mut seed = chain.home();
        seed[2] = 3.0;
        let target = chain.forward_kinematics(&chain.home()).unwrap();
        assert!(matches!(
            solve_ik(&chain, &target, &seed, &IkOptions::default()),
            Err(KinematicsError::LimitViolation { .. })
        ));
    }
}
