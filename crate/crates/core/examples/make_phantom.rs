//! Regenerates the bundled phantom mesh and its manifest.
//!
//! cargo run -p ifind-sim --example make_phantom -- crates/core/assets/meshes

use std::path::PathBuf;

use ifind_sim::surface::{shapes, MeshManifest};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "crates/core/assets/meshes".into()),
    );
    let off = shapes::phantom_shape().to_off_string();
    let manifest = MeshManifest::describe("phantom-abdomen", &off)?;
    std::fs::write(dir.join("phantom-abdomen.off"), &off)?;
    let header = "# Generated by `cargo run -p ifind-sim --example make_phantom`.\n";
    std::fs::write(
        dir.join("phantom-abdomen.toml"),
        format!("{header}{}", toml::to_string(&manifest)?),
    )?;
    println!(
        "{} vertices, {} triangles, sha256 {}",
        manifest.vertex_count, manifest.triangle_count, manifest.sha256
    );
    Ok(())
}
