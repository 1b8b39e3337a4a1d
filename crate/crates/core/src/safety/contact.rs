use nalgebra::{Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::kinematics::Pose;
use crate::surface::SurfaceMesh;

/// Tissue spring model parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContactParams {
    /// N/m
    pub stiffness: f64,
    pub friction: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self {
            stiffness: 2000.0,
            friction: 0.3,
        }
    }
}

/// Probe–tissue force: normal along the outward surface normal, lateral in the tangent plane.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContactForce {
    /// N, pushing the probe out of the tissue.
    pub normal: f64,
    /// N, friction drag components along `tangent[0]` and `tangent[1]`.
    pub lateral: [f64; 2],
    /// Penetration depth of the tip, m.
    pub indentation: f64,
    /// Outward normal at the contact, world frame (zero when out of contact).
    pub direction: Vector3<f64>,
    /// Tangent basis the lateral components are expressed in.
    pub tangent: [Vector3<f64>; 2],
}

impl ContactForce {
    pub fn lateral_magnitude(&self) -> f64 {
        self.lateral[0].hypot(self.lateral[1])
    }

    /// Force the tissue applies to the probe, world frame.
    pub fn world_force(&self) -> Vector3<f64> {
        self.direction * self.normal + self.tangent[0] * self.lateral[0] + self.tangent[1] * self.lateral[1]
    }

    /// Wrench at the probe tip (force then moment); the force acts at the tip so the moment is zero.
    pub fn tip_wrench(&self) -> Vector6<f64> {
        let f = self.world_force();
        Vector6::new(f.x, f.y, f.z, 0.0, 0.0, 0.0)
    }

    pub fn in_contact(&self) -> bool {
        self.indentation > 0.0
    }
}

/// Tangent basis at `normal`: world x projected into the plane (world y if degenerate), then n × t0.
pub fn tangent_basis(normal: &Vector3<f64>) -> [Vector3<f64>; 2] {
    let mut t0 = Vector3::x() - normal * normal.x;
    if t0.norm() < 1e-6 {
        t0 = Vector3::y() - normal * normal.y;
    }
    let t0 = t0.normalize();
    [t0, normal.cross(&t0)]
}

/// Spring contact at the probe tip.
///
/// Indentation is `max(0, (closest − tip) · n)`; normal force `stiffness · d`.
/// Friction has magnitude `friction · normal` and opposes the tangential part
/// of `tip_velocity`; it is zero when the tip is not moving along the surface.
pub fn contact_force(
    mesh: &SurfaceMesh,
    probe: &Pose,
    params: &ContactParams,
    tip_velocity: &Vector3<f64>,
) -> ContactForce {
    let sp = mesh.closest_point(&probe.position);
    let depth = (sp.point - probe.position).dot(&sp.normal).max(0.0);
    if depth <= 0.0 {
        return ContactForce::default();
    }
    let normal = params.stiffness * depth;
    let tangent = tangent_basis(&sp.normal);
    let v_t = tip_velocity - sp.normal * sp.normal.dot(tip_velocity);
    let lateral = if v_t.norm() > 1e-12 {
        let drag = -v_t.normalize() * params.friction * normal;
        [drag.dot(&tangent[0]), drag.dot(&tangent[1])]
    } else {
        [0.0, 0.0]
    };
    ContactForce {
        normal,
        lateral,
        indentation: depth,
        direction: sp.normal,
        tangent,
    }
}

/// Reading of the probe-axis proximity sensor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Proximity {
    /// Distance along the probe axis to the surface, m.
    Distance { distance: f64 },
    /// Tip is below the surface by `depth`.
    Contact { depth: f64 },
    /// Nothing ahead of the probe.
    Clear,
}

/// Raycast from the tip along the probe axis; `Contact` when the tip is already below the surface.
pub fn proximity(mesh: &SurfaceMesh, probe: &Pose) -> Proximity {
    let sp = mesh.closest_point(&probe.position);
    let signed = (probe.position - sp.point).dot(&sp.normal);
    if signed < 0.0 {
        return Proximity::Contact { depth: -signed };
    }
    match mesh.raycast(&probe.position, &probe.axis()) {
        Some(hit) => Proximity::Distance {
            distance: hit.distance,
        },
        None => Proximity::Clear,
    }
}
