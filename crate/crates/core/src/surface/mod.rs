//! Scanned-surface meshes and probe placement on them.

mod bvh;
mod contact;
mod mesh;
mod off;
mod query;
pub mod shapes;
mod sweep;

pub use contact::{probe_orientation, probe_pose_at, ContactPose, ON_SURFACE_TOL};
pub use mesh::{SurfaceMesh, MIN_TRIANGLE_AREA};
pub use off::{load_mesh, parse_off, save_mesh, to_off_string};
pub use query::{closest_point_on_triangle, ray_triangle, RayHit, SurfacePoint, RAY_T_MIN};
pub use sweep::{generate_sweep, SweepPath, MAX_ENDPOINT_OFFSET, SPACING_RTOL};

use thiserror::Error;

/// Bundled phantom mesh, ASCII OFF.
pub const PHANTOM_OFF: &str = include_str!("../../assets/meshes/phantom-abdomen.off");
/// Manifest describing [`PHANTOM_OFF`].
pub const PHANTOM_MANIFEST: &str = include_str!("../../assets/meshes/phantom-abdomen.toml");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurfaceError {
    #[error("{0}")]
    Io(String),
    #[error("mesh parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),
    #[error("point is {distance:.4} m from the surface")]
    OffSurface { distance: f64 },
    #[error("sweep path is empty")]
    EmptyPath,
    #[error("surface projection jumps near segment parameter {parameter}")]
    Discontinuous { parameter: f64 },
    #[error("{0}")]
    InvalidArgument(String),
}

/// The bundled half-ellipsoid abdominal phantom.
pub fn phantom() -> SurfaceMesh {
    SurfaceMesh::from_off_str(PHANTOM_OFF).expect("bundled phantom parses")
}

/// Parsed phantom manifest.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshManifest {
    pub name: String,
    pub semi_axes: [f64; 3],
    pub rings: usize,
    pub segments: usize,
    pub vertex_count: usize,
    pub triangle_count: usize,
    pub bbox_min: [f64; 3],
    pub bbox_max: [f64; 3],
    /// SHA-256 of the OFF file bytes, lowercase hex.
    pub sha256: String,
}

impl MeshManifest {
    pub fn bundled() -> Self {
        toml::from_str(PHANTOM_MANIFEST).expect("bundled manifest parses")
    }

    /// Manifest for OFF text generated from the phantom parameters.
    pub fn describe(name: &str, off: &str) -> Result<Self, SurfaceError> {
        use sha2::{Digest, Sha256};
        let mesh = SurfaceMesh::from_off_str(off)?;
        let (lo, hi) = mesh.bounding_box();
        let digest = Sha256::digest(off.as_bytes());
        Ok(Self {
            name: name.to_string(),
            semi_axes: shapes::PHANTOM_SEMI_AXES,
            rings: shapes::PHANTOM_RINGS,
            segments: shapes::PHANTOM_SEGMENTS,
            vertex_count: mesh.vertices().len(),
            triangle_count: mesh.triangles().len(),
            bbox_min: lo.into(),
            bbox_max: hi.into(),
            sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        })
    }
}
