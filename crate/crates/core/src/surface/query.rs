use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::bvh::Visit;
use super::mesh::SurfaceMesh;

/// Hits closer than this are treated as the ray origin itself.
pub const RAY_T_MIN: f64 = 1e-12;

/// Closest surface point to a query.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub point: Vector3<f64>,
    /// Interpolated outward vertex normal at `point`.
    pub normal: Vector3<f64>,
    pub triangle: usize,
    /// Barycentric weights of `point` in `triangle`.
    pub barycentric: [f64; 3],
    pub distance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayHit {
    pub distance: f64,
    pub triangle: usize,
    pub point: Vector3<f64>,
}

/// Closest point on triangle `abc` to `p` with its barycentric weights (Ericson's region walk).
pub fn closest_point_on_triangle(
    p: &Vector3<f64>,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Vector3<f64>,
) -> (Vector3<f64>, [f64; 3]) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, [1.0, 0.0, 0.0]);
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, [0.0, 1.0, 0.0]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, [1.0 - v, v, 0.0]);
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, [0.0, 0.0, 1.0]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, [1.0 - w, 0.0, w]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, [0.0, 1.0 - w, w]);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, [1.0 - v - w, v, w])
}

/// Barycentric slack so rays through a shared edge or vertex hit at least one triangle.
const BARY_EPS: f64 = 1e-10;

/// Möller–Trumbore intersection, two-sided. Returns `t` for hits with `t > RAY_T_MIN`.
pub fn ray_triangle(
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Vector3<f64>,
) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let h = dir.cross(&e2);
    let det = e1.dot(&h);
    if det.abs() < 1e-18 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - a;
    let u = inv * s.dot(&h);
    if !(-BARY_EPS..=1.0 + BARY_EPS).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = inv * dir.dot(&q);
    if v < -BARY_EPS || u + v > 1.0 + BARY_EPS {
        return None;
    }
    let t = inv * e2.dot(&q);
    (t > RAY_T_MIN).then_some(t)
}

impl SurfaceMesh {
    /// Closest surface point to `p`; equal distances go to the lowest triangle id.
    pub fn closest_point(&self, p: &Vector3<f64>) -> SurfacePoint {
        let mut best: Option<(f64, usize, Vector3<f64>, [f64; 3])> = None;
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            let bound = self.bvh.bounds(node).distance_sq(p);
            if let Some((d2, ..)) = best {
                if bound > d2 {
                    continue;
                }
            }
            match self.bvh.visit(node) {
                Visit::Leaf(range) => {
                    for slot in range {
                        let t = self.bvh.triangle_at(slot);
                        let [a, b, c] = self.triangle(t);
                        let (q, bary) = closest_point_on_triangle(p, &a, &b, &c);
                        let d2 = (p - q).norm_squared();
                        let better = match best {
                            None => true,
                            Some((bd, bt, ..)) => d2 < bd || (d2 == bd && t < bt),
                        };
                        if better {
                            best = Some((d2, t, q, bary));
                        }
                    }
                }
                Visit::Children(l, r) => {
                    // Nearer child last so it is popped first.
                    let dl = self.bvh.bounds(l).distance_sq(p);
                    let dr = self.bvh.bounds(r).distance_sq(p);
                    if dl <= dr {
                        stack.push(r);
                        stack.push(l);
                    } else {
                        stack.push(l);
                        stack.push(r);
                    }
                }
            }
        }
        let (d2, triangle, point, barycentric) = best.expect("mesh has triangles");
        SurfacePoint {
            point,
            normal: self.interpolated_normal(triangle, barycentric),
            triangle,
            barycentric,
            distance: d2.sqrt(),
        }
    }

    /// Nearest intersection along a ray; `direction` should be unit length so the
    /// distance is in metres. Equal distances go to the lowest triangle id.
    pub fn raycast(&self, origin: &Vector3<f64>, direction: &Vector3<f64>) -> Option<RayHit> {
        let inv = direction.map(|d| 1.0 / d);
        let mut best: Option<(f64, usize)> = None;
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            let t_max = best.map_or(f64::INFINITY, |(t, _)| t);
            if self.bvh.bounds(node).ray_entry(origin, &inv, t_max).is_none() {
                continue;
            }
            match self.bvh.visit(node) {
                Visit::Leaf(range) => {
                    for slot in range {
                        let tri = self.bvh.triangle_at(slot);
                        let [a, b, c] = self.triangle(tri);
                        if let Some(t) = ray_triangle(origin, direction, &a, &b, &c) {
                            let better = match best {
                                None => true,
                                Some((bt, bi)) => t < bt || (t == bt && tri < bi),
                            };
                            if better {
                                best = Some((t, tri));
                            }
                        }
                    }
                }
                Visit::Children(l, r) => {
                    stack.push(r);
                    stack.push(l);
                }
            }
        }
        best.map(|(t, triangle)| RayHit {
            distance: t,
            triangle,
            point: origin + direction * t,
        })
    }

    /// Signed distance of `p` along the closest point's normal: negative below the surface.
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        let sp = self.closest_point(p);
        (p - sp.point).dot(&sp.normal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_regions() {
        let a = Vector3::new(0.0, 0.0, 0.0);
        let b = Vector3::new(1.0, 0.0, 0.0);
        let c = Vector3::new(0.0, 1.0, 0.0);
        let (q, w) = closest_point_on_triangle(&Vector3::new(0.2, 0.2, 1.0), &a, &b, &c);
        assert!((q - Vector3::new(0.2, 0.2, 0.0)).norm() < 1e-15);
        assert!((w[0] - 0.6).abs() < 1e-15);
        let (q, _) = closest_point_on_triangle(&Vector3::new(-1.0, -1.0, 0.0), &a, &b, &c);
        assert_eq!(q, a);
        let (q, _) = closest_point_on_triangle(&Vector3::new(1.0, 1.0, 0.0), &a, &b, &c);
        assert!((q - Vector3::new(0.5, 0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn ray_hits_from_both_sides() {
        let a = Vector3::new(0.0, 0.0, 0.0);
        let b = Vector3::new(1.0, 0.0, 0.0);
        let c = Vector3::new(0.0, 1.0, 0.0);
        let down = ray_triangle(&Vector3::new(0.1, 0.1, 2.0), &-Vector3::z(), &a, &b, &c);
        let up = ray_triangle(&Vector3::new(0.1, 0.1, -2.0), &Vector3::z(), &a, &b, &c);
        assert_eq!(down, Some(2.0));
        assert_eq!(up, Some(2.0));
        assert_eq!(
            ray_triangle(&Vector3::new(0.1, 0.1, 2.0), &Vector3::z(), &a, &b, &c),
            None
        );
    }
}
