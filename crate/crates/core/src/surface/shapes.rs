//! Procedural meshes: the abdominal phantom, test spheres and flat patches.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector3;

use super::mesh::SurfaceMesh;

/// Semi-axes (x, y, z) of the bundled phantom, metres.
pub const PHANTOM_SEMI_AXES: [f64; 3] = [0.18, 0.14, 0.10];
pub const PHANTOM_RINGS: usize = 16;
pub const PHANTOM_SEGMENTS: usize = 48;

/// Open upper half-ellipsoid resting on z = 0 with its apex at `(0, 0, c)`.
///
/// One apex vertex, then `rings` rings of `segments` vertices at polar angles
/// `k·(π/2)/rings`, the last ring lying on z = 0.
pub fn half_ellipsoid(a: f64, b: f64, c: f64, rings: usize, segments: usize) -> SurfaceMesh {
    assert!(rings >= 1 && segments >= 3);
    let mut v = vec![Vector3::new(0.0, 0.0, c)];
    for k in 1..=rings {
        let theta = FRAC_PI_2 * k as f64 / rings as f64;
        let (st, ct) = theta.sin_cos();
        // Pin the rim exactly to the bed plane.
        let z = if k == rings { 0.0 } else { c * ct };
        for s in 0..segments {
            let phi = 2.0 * PI * s as f64 / segments as f64;
            let (sp, cp) = phi.sin_cos();
            v.push(Vector3::new(a * st * cp, b * st * sp, z));
        }
    }
    let ring = |k: usize, s: usize| 1 + (k - 1) * segments + s % segments;
    let mut t = Vec::with_capacity(segments * (2 * rings - 1));
    for s in 0..segments {
        t.push([0, ring(1, s), ring(1, s + 1)]);
    }
    for k in 1..rings {
        for s in 0..segments {
            let (a0, a1) = (ring(k, s), ring(k, s + 1));
            let (b0, b1) = (ring(k + 1, s), ring(k + 1, s + 1));
            t.push([a0, b0, b1]);
            t.push([a0, b1, a1]);
        }
    }
    SurfaceMesh::new(v, t).expect("half-ellipsoid is well formed")
}

/// The phantom shape at its default resolution.
pub fn phantom_shape() -> SurfaceMesh {
    let [a, b, c] = PHANTOM_SEMI_AXES;
    half_ellipsoid(a, b, c, PHANTOM_RINGS, PHANTOM_SEGMENTS)
}

/// Icosahedron subdivided `level` times, vertices on the sphere of `radius` about the origin.
pub fn icosphere(radius: f64, level: usize) -> SurfaceMesh {
    let p = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v: Vec<Vector3<f64>> = [
        [-1.0, p, 0.0],
        [1.0, p, 0.0],
        [-1.0, -p, 0.0],
        [1.0, -p, 0.0],
        [0.0, -1.0, p],
        [0.0, 1.0, p],
        [0.0, -1.0, -p],
        [0.0, 1.0, -p],
        [p, 0.0, -1.0],
        [p, 0.0, 1.0],
        [-p, 0.0, -1.0],
        [-p, 0.0, 1.0],
    ]
    .iter()
    .map(|c| Vector3::new(c[0], c[1], c[2]).normalize())
    .collect();
    let mut t: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, v: &mut Vec<Vector3<f64>>| {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                v.push(((v[a] + v[b]) * 0.5).normalize());
                v.len() - 1
            })
        };
        let mut next = Vec::with_capacity(t.len() * 4);
        for [a, b, c] in t {
            let ab = midpoint(a, b, &mut v);
            let bc = midpoint(b, c, &mut v);
            let ca = midpoint(c, a, &mut v);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        t = next;
    }
    for p in &mut v {
        *p *= radius;
    }
    SurfaceMesh::new(v, t).expect("icosphere is well formed")
}

/// Square grid on z = `height`, centred on the origin, side `size`, `cells` per side, normal +z.
pub fn flat_patch(size: f64, cells: usize, height: f64) -> SurfaceMesh {
    assert!(cells >= 1);
    let n = cells + 1;
    let mut v = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            v.push(Vector3::new(
                -size / 2.0 + size * i as f64 / cells as f64,
                -size / 2.0 + size * j as f64 / cells as f64,
                height,
            ));
        }
    }
    let mut t = Vec::with_capacity(2 * cells * cells);
    for j in 0..cells {
        for i in 0..cells {
            let a = j * n + i;
            t.push([a, a + 1, a + n + 1]);
            t.push([a, a + n + 1, a + n]);
        }
    }
    SurfaceMesh::new(v, t).expect("patch is well formed")
}
