use nalgebra::Vector3;

use super::bvh::Bvh;
use super::SurfaceError;

/// Triangles with less area than this are degenerate.
pub const MIN_TRIANGLE_AREA: f64 = 1e-14;

/// Validated triangle mesh of a scanned surface, immutable after construction.
#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    vertices: Vec<Vector3<f64>>,
    triangles: Vec<[usize; 3]>,
    vertex_normals: Vec<Vector3<f64>>,
    face_normals: Vec<Vector3<f64>>,
    centroid: Vector3<f64>,
    pub(crate) bvh: Bvh,
}

impl SurfaceMesh {
    /// Validate indices and areas, then compute outward area-weighted vertex normals.
    ///
    /// Faces keep their winding; if the area-weighted face normals point on
    /// average toward the vertex centroid, every face is flipped. Planar meshes
    /// keep the winding given.
    pub fn new(
        vertices: Vec<Vector3<f64>>,
        mut triangles: Vec<[usize; 3]>,
    ) -> Result<Self, SurfaceError> {
        if vertices.is_empty() || triangles.is_empty() {
            return Err(SurfaceError::DegenerateMesh("mesh has no triangles".into()));
        }
        if let Some(v) = vertices.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(SurfaceError::DegenerateMesh(format!(
                "vertex {v} is not finite"
            )));
        }
        let nv = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&i| i >= nv) {
                return Err(SurfaceError::DegenerateMesh(format!(
                    "triangle {t} index {bad} out of range for {nv} vertices"
                )));
            }
        }
        let centroid = vertices.iter().sum::<Vector3<f64>>() / nv as f64;

        let mut scaled: Vec<Vector3<f64>> = Vec::with_capacity(triangles.len());
        let mut outward = 0.0;
        let mut scale = 0.0;
        for (t, tri) in triangles.iter().enumerate() {
            let [a, b, c] = tri.map(|i| vertices[i]);
            let n2 = (b - a).cross(&(c - a));
            if 0.5 * n2.norm() < MIN_TRIANGLE_AREA {
                return Err(SurfaceError::DegenerateMesh(format!(
                    "triangle {t} has zero area"
                )));
            }
            let arm = (a + b + c) / 3.0 - centroid;
            outward += n2.dot(&arm);
            scale += n2.norm() * arm.norm();
            scaled.push(n2);
        }
        // Flat sheets sum to rounding noise; keep their winding.
        if outward < -1e-9 * scale {
            for (tri, n) in triangles.iter_mut().zip(scaled.iter_mut()) {
                tri.swap(1, 2);
                *n = -*n;
            }
        }

        let mut vertex_normals = vec![Vector3::zeros(); nv];
        for (tri, n) in triangles.iter().zip(&scaled) {
            for &i in tri {
                vertex_normals[i] += n;
            }
        }
        for (i, n) in vertex_normals.iter_mut().enumerate() {
            let len = n.norm();
            if len == 0.0 {
                // Unreferenced vertex: fall back to the centroid ray.
                let ray = vertices[i] - centroid;
                *n = if ray.norm() > 0.0 {
                    ray.normalize()
                } else {
                    Vector3::z()
                };
            } else {
                *n /= len;
            }
        }
        let face_normals = scaled.iter().map(|n| n.normalize()).collect();
        let bvh = Bvh::build(&vertices, &triangles);
        Ok(Self {
            vertices,
            triangles,
            vertex_normals,
            face_normals,
            centroid,
            bvh,
        })
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn vertex_normals(&self) -> &[Vector3<f64>] {
        &self.vertex_normals
    }

    pub fn face_normal(&self, triangle: usize) -> Vector3<f64> {
        self.face_normals[triangle]
    }

    /// Mean of the vertex positions.
    pub fn centroid(&self) -> Vector3<f64> {
        self.centroid
    }

    pub fn triangle(&self, t: usize) -> [Vector3<f64>; 3] {
        self.triangles[t].map(|i| self.vertices[i])
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounding_box(&self) -> (Vector3<f64>, Vector3<f64>) {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Normal at barycentric coordinates of a triangle, interpolated from vertex normals.
    pub fn interpolated_normal(&self, t: usize, bary: [f64; 3]) -> Vector3<f64> {
        let tri = self.triangles[t];
        let n = self.vertex_normals[tri[0]] * bary[0]
            + self.vertex_normals[tri[1]] * bary[1]
            + self.vertex_normals[tri[2]] * bary[2];
        let len = n.norm();
        if len < 1e-12 {
            self.face_normals[t]
        } else {
            n / len
        }
    }
}
