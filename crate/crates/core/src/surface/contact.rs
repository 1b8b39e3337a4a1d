use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::mesh::SurfaceMesh;
use super::SurfaceError;
use crate::kinematics::Pose;

/// How far a contact point may sit from the mesh and still count as on it.
pub const ON_SURFACE_TOL: f64 = 1e-6;

/// A probe placement on the surface.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactPose {
    pub surface_point: Vector3<f64>,
    /// Outward unit normal at `surface_point`.
    pub normal: Vector3<f64>,
    /// Depth pressed along `-normal`, metres.
    pub indentation: f64,
    /// Rotation about the probe axis, radians.
    pub axial_roll: f64,
}

impl ContactPose {
    /// Contact at the surface point closest to `p`.
    pub fn on_mesh(mesh: &SurfaceMesh, p: &Vector3<f64>, indentation: f64, axial_roll: f64) -> Self {
        let sp = mesh.closest_point(p);
        Self {
            surface_point: sp.point,
            normal: sp.normal,
            indentation: indentation.max(0.0),
            axial_roll,
        }
    }

    /// Probe-tip pose for this contact; see [`probe_orientation`].
    pub fn probe_pose(&self) -> Pose {
        Pose::new(
            self.surface_point - self.normal * self.indentation,
            probe_orientation(&self.normal, self.axial_roll),
        )
    }
}

/// Probe frame for an outward `normal`: local z along `-normal`; local x is
/// world x projected onto the tangent plane (world y when x is nearly normal);
/// then rotated by `roll` about local z.
pub fn probe_orientation(normal: &Vector3<f64>, roll: f64) -> UnitQuaternion<f64> {
    let z = -normal.normalize();
    let mut x = Vector3::x() - z * z.x;
    if x.norm() < 1e-6 {
        x = Vector3::y() - z * z.y;
    }
    let x = x.normalize();
    let y = z.cross(&x);
    let base = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z]));
    UnitQuaternion::from_rotation_matrix(&base)
        * UnitQuaternion::from_axis_angle(&Vector3::z_axis(), roll)
}

/// Probe-tip pose for `contact`, after checking its point lies on `mesh`.
pub fn probe_pose_at(mesh: &SurfaceMesh, contact: &ContactPose) -> Result<Pose, SurfaceError> {
    let d = mesh.closest_point(&contact.surface_point).distance;
    if d > ON_SURFACE_TOL {
        return Err(SurfaceError::OffSurface { distance: d });
    }
    Ok(contact.probe_pose())
}
