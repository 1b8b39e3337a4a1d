use nalgebra::{Isometry3, Matrix3xX, Matrix6xX, Point3, Vector3};

use super::chain::{JointKind, KinematicChain};
use super::pose::Pose;
use super::KinematicsError;

/// One elementary motion in the transform product, scaled by `coeff` times a joint rate.
#[derive(Clone, Copy, Debug)]
struct Contributor {
    joint: usize,
    /// Index of the first joint frame this motion moves.
    frame: usize,
    origin: Vector3<f64>,
    axis: Vector3<f64>,
    kind: JointKind,
    coeff: f64,
}

/// Evaluated chain at one configuration: world frames plus what is needed for Jacobians.
#[derive(Clone, Debug)]
pub struct ChainState {
    /// Joint frames after each joint's motion, then the tool frame last.
    frames: Vec<Isometry3<f64>>,
    contributors: Vec<Contributor>,
    dof: usize,
}

impl ChainState {
    /// Evaluate `chain` at `q` with its base placed at `base`. `q` is not limit-checked.
    pub fn evaluate(chain: &KinematicChain, base: &Isometry3<f64>, q: &[f64]) -> Self {
        let n = chain.dof();
        let mut frames = Vec::with_capacity(n + 1);
        let mut contributors = Vec::with_capacity(n + chain.parallelogram.len());
        let mut t = *base;
        for (i, joint) in chain.joints.iter().enumerate() {
            t *= joint.pre;
            for pair in chain.parallelogram.iter().filter(|p| p.compensated == i) {
                let driver = &chain.joints[pair.driver];
                contributors.push(Contributor {
                    joint: pair.driver,
                    frame: i,
                    origin: t.translation.vector,
                    axis: t.rotation * driver.axis,
                    kind: driver.kind,
                    coeff: -1.0,
                });
                t *= driver.kind.motion(&driver.axis, -q[pair.driver]);
            }
            contributors.push(Contributor {
                joint: i,
                frame: i,
                origin: t.translation.vector,
                axis: t.rotation * joint.axis,
                kind: joint.kind,
                coeff: 1.0,
            });
            t *= joint.kind.motion(&joint.axis, q[i]);
            frames.push(t);
        }
        frames.push(t * chain.tool);
        Self {
            frames,
            contributors,
            dof: n,
        }
    }

    pub fn tip(&self) -> &Isometry3<f64> {
        self.frames.last().expect("tool frame")
    }

    /// Joint frames followed by the tool frame.
    pub fn frames(&self) -> &[Isometry3<f64>] {
        &self.frames
    }

    /// Linear velocity Jacobian of a world point rigidly attached to frame `frame`.
    pub fn point_jacobian(&self, frame: usize, point: &Vector3<f64>) -> Matrix3xX<f64> {
        let mut jac = Matrix3xX::zeros(self.dof);
        for c in self.contributors.iter().filter(|c| c.frame <= frame) {
            let lin = match c.kind {
                JointKind::Revolute => c.axis.cross(&(point - c.origin)),
                JointKind::Prismatic => c.axis,
            };
            let mut col = jac.column_mut(c.joint);
            col += lin * c.coeff;
        }
        jac
    }

    /// Geometric Jacobian of the tool frame in the base frame: rows are linear then angular.
    pub fn tip_jacobian(&self) -> Matrix6xX<f64> {
        let p = self.tip().translation.vector;
        let mut jac = Matrix6xX::zeros(self.dof);
        for c in &self.contributors {
            let (lin, ang) = match c.kind {
                JointKind::Revolute => (c.axis.cross(&(p - c.origin)), c.axis),
                JointKind::Prismatic => (c.axis, Vector3::zeros()),
            };
            for r in 0..3 {
                jac[(r, c.joint)] += c.coeff * lin[r];
                jac[(r + 3, c.joint)] += c.coeff * ang[r];
            }
        }
        jac
    }

    /// World position of a point given in frame-local coordinates.
    pub fn to_world(&self, frame: usize, local: &Vector3<f64>) -> Vector3<f64> {
        (self.frames[frame] * Point3::from(*local)).coords
    }
}

impl KinematicChain {
    /// Probe-tip pose at `q`.
    pub fn forward_kinematics(&self, q: &[f64]) -> Result<Pose, KinematicsError> {
        self.check(q)?;
        let state = ChainState::evaluate(self, &Isometry3::identity(), q);
        Ok(Pose::from_isometry(state.tip()))
    }

    /// One pose per joint frame plus the tool frame; the last equals [`Self::forward_kinematics`].
    pub fn link_frames(&self, q: &[f64]) -> Result<Vec<Pose>, KinematicsError> {
        self.check(q)?;
        let state = ChainState::evaluate(self, &Isometry3::identity(), q);
        Ok(state.frames().iter().map(Pose::from_isometry).collect())
    }

    /// 6 x n geometric Jacobian (linear m/s rows first, then angular rad/s) in the base frame.
    pub fn jacobian(&self, q: &[f64]) -> Result<Matrix6xX<f64>, KinematicsError> {
        self.check(q)?;
        Ok(ChainState::evaluate(self, &Isometry3::identity(), q).tip_jacobian())
    }

    /// Evaluate without limit checks, e.g. for a chain mounted on a rig.
    pub fn state_at(&self, base: &Isometry3<f64>, q: &[f64]) -> ChainState {
        ChainState::evaluate(self, base, q)
    }
}

/// Free-function form of [`KinematicChain::forward_kinematics`].
pub fn forward_kinematics(chain: &KinematicChain, q: &[f64]) -> Result<Pose, KinematicsError> {
    chain.forward_kinematics(q)
}

/// Free-function form of [`KinematicChain::link_frames`].
pub fn link_frames(chain: &KinematicChain, q: &[f64]) -> Result<Vec<Pose>, KinematicsError> {
    chain.link_frames(q)
}

/// Free-function form of [`KinematicChain::jacobian`].
pub fn jacobian(chain: &KinematicChain, q: &[f64]) -> Result<Matrix6xX<f64>, KinematicsError> {
    chain.jacobian(q)
}
