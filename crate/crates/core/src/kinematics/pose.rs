use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// A rigid placement: position in metres and a unit quaternion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Vector3::zeros(), UnitQuaternion::identity())
    }

    /// Builds a pose from `[x, y, z, qw, qx, qy, qz]`; the quaternion is renormalised.
    pub fn from_slice(v: &[f64]) -> Option<Self> {
        if v.len() != 7 {
            return None;
        }
        let q = nalgebra::Quaternion::new(v[3], v[4], v[5], v[6]);
        if q.norm() < 1e-12 {
            return None;
        }
        Some(Self::new(
            Vector3::new(v[0], v[1], v[2]),
            UnitQuaternion::from_quaternion(q),
        ))
    }

    /// `[x, y, z, qw, qx, qy, qz]`
    pub fn to_array(&self) -> [f64; 7] {
        let q = self.orientation.quaternion();
        [
            self.position.x,
            self.position.y,
            self.position.z,
            q.w,
            q.i,
            q.j,
            q.k,
        ]
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.position), self.orientation)
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        Self::new(iso.translation.vector, iso.rotation)
    }

    /// Unit direction of the probe axis (local +z), pointing from the probe body into the tissue.
    pub fn axis(&self) -> Vector3<f64> {
        self.orientation * Vector3::z()
    }

    /// Position distance and rotation angle to `other`. Angles are in `[0, pi]`.
    pub fn error_to(&self, other: &Pose) -> (f64, f64) {
        let dp = (self.position - other.position).norm();
        let dr = self.orientation.angle_to(&other.orientation);
        (dp, dr)
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl From<Isometry3<f64>> for Pose {
    fn from(iso: Isometry3<f64>) -> Self {
        Self::from_isometry(&iso)
    }
}

/// Fixed transform as written in config files: translation plus roll/pitch/yaw
/// (R = Rz(yaw) * Ry(pitch) * Rx(roll)), radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigidTransform {
    pub translation: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            translation: [0.0; 3],
            rpy: [0.0; 3],
        }
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        let [x, y, z] = self.translation;
        let [r, p, yaw] = self.rpy;
        Isometry3::from_parts(
            Translation3::new(x, y, z),
            UnitQuaternion::from_euler_angles(r, p, yaw),
        )
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}
