use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::contact::ContactPose;
use super::mesh::SurfaceMesh;
use super::query::SurfacePoint;
use super::SurfaceError;

/// Relative slack on the spacing bound, absorbing rounding on exactly-divisible paths.
pub const SPACING_RTOL: f64 = 1e-9;
/// Sweep endpoints must lie within this distance of the mesh.
pub const MAX_ENDPOINT_OFFSET: f64 = 0.05;

/// Ordered probe contacts along a scan line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPath {
    pub waypoints: Vec<ContactPose>,
    /// Upper bound on the distance between consecutive surface points.
    pub spacing: f64,
}

impl SweepPath {
    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    /// Whether every consecutive pair honours `spacing` (with [`SPACING_RTOL`]).
    pub fn spacing_holds(&self) -> bool {
        self.waypoints.windows(2).all(|w| {
            (w[1].surface_point - w[0].surface_point).norm() <= self.spacing * (1.0 + SPACING_RTOL)
        })
    }

    /// Largest gap between consecutive surface points.
    pub fn max_gap(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| (w[1].surface_point - w[0].surface_point).norm())
            .fold(0.0, f64::max)
    }

    /// Same path with every waypoint at roll `roll`.
    pub fn with_roll(mut self, roll: f64) -> Self {
        for w in &mut self.waypoints {
            w.axial_roll = roll;
        }
        self
    }

    /// Path through the surface points closest to `points`, in order.
    /// The recorded spacing is the largest resulting gap.
    pub fn from_points(
        mesh: &SurfaceMesh,
        points: &[Vector3<f64>],
        indentation: f64,
        roll: f64,
    ) -> Result<Self, SurfaceError> {
        if points.is_empty() {
            return Err(SurfaceError::EmptyPath);
        }
        let waypoints = points
            .iter()
            .map(|p| ContactPose::on_mesh(mesh, p, indentation, roll))
            .collect();
        let mut path = Self {
            waypoints,
            spacing: 0.0,
        };
        path.spacing = path.max_gap();
        Ok(path)
    }

    /// `n` waypoints at equal arc length along the polyline of surface points,
    /// re-projected onto `mesh`. Indentation and roll come from the first waypoint.
    pub fn resample(&self, mesh: &SurfaceMesh, n: usize) -> Result<Self, SurfaceError> {
        if n == 0 || self.waypoints.is_empty() {
            return Err(SurfaceError::EmptyPath);
        }
        let pts: Vec<Vector3<f64>> = self.waypoints.iter().map(|w| w.surface_point).collect();
        let mut cum = vec![0.0];
        for w in pts.windows(2) {
            cum.push(cum.last().unwrap() + (w[1] - w[0]).norm());
        }
        let total = *cum.last().unwrap();
        let samples: Vec<Vector3<f64>> = (0..n)
            .map(|i| {
                if n == 1 || total == 0.0 {
                    return pts[0];
                }
                let s = total * i as f64 / (n - 1) as f64;
                let k = match cum.iter().position(|&c| c >= s) {
                    Some(0) => return pts[0],
                    Some(k) => k,
                    None => return *pts.last().unwrap(),
                };
                let f = (s - cum[k - 1]) / (cum[k] - cum[k - 1]);
                pts[k - 1] + (pts[k] - pts[k - 1]) * f
            })
            .collect();
        let first = self.waypoints[0];
        Self::from_points(mesh, &samples, first.indentation, first.axial_roll)
    }
}

/// Sweep from `start` to `end`: uniform samples of the segment projected onto the mesh,
/// bisected in segment parameter until consecutive surface points are within `spacing`.
pub fn generate_sweep(
    mesh: &SurfaceMesh,
    start: &Vector3<f64>,
    end: &Vector3<f64>,
    spacing: f64,
    indentation: f64,
) -> Result<SweepPath, SurfaceError> {
    if !(spacing > 0.0) {
        return Err(SurfaceError::InvalidArgument(format!(
            "spacing must be positive, got {spacing}"
        )));
    }
    let length = (end - start).norm();
    if length < 1e-12 {
        return Err(SurfaceError::EmptyPath);
    }
    for p in [start, end] {
        let d = mesh.closest_point(p).distance;
        if d > MAX_ENDPOINT_OFFSET {
            return Err(SurfaceError::OffSurface { distance: d });
        }
    }
    let segments = (length / spacing).ceil().max(1.0) as usize;
    let at = |t: f64| mesh.closest_point(&(start + (end - start) * t));
    let limit = spacing * (1.0 + SPACING_RTOL);

    let mut out: Vec<SurfacePoint> = vec![at(0.0)];
    for i in 0..segments {
        let t0 = i as f64 / segments as f64;
        let t1 = (i + 1) as f64 / segments as f64;
        let a = *out.last().unwrap();
        let b = at(t1);
        refine(&at, t0, a, t1, b, limit, &mut out)?;
        out.push(b);
    }
    Ok(SweepPath {
        waypoints: out
            .into_iter()
            .map(|sp| ContactPose {
                surface_point: sp.point,
                normal: sp.normal,
                indentation: indentation.max(0.0),
                axial_roll: 0.0,
            })
            .collect(),
        spacing,
    })
}

/// Push the points strictly between `a` (at `t0`) and `b` (at `t1`) needed to meet `limit`.
fn refine(
    at: &impl Fn(f64) -> SurfacePoint,
    t0: f64,
    a: SurfacePoint,
    t1: f64,
    b: SurfacePoint,
    limit: f64,
    out: &mut Vec<SurfacePoint>,
) -> Result<(), SurfaceError> {
    if (b.point - a.point).norm() <= limit {
        return Ok(());
    }
    let tm = 0.5 * (t0 + t1);
    if tm <= t0 || tm >= t1 || t1 - t0 < 1e-12 {
        return Err(SurfaceError::Discontinuous { parameter: tm });
    }
    let m = at(tm);
    refine(at, t0, a, tm, m, limit, out)?;
    out.push(m);
    refine(at, tm, m, t1, b, limit, out)
}
