use ifind_sim::surface::*;
use nalgebra::Vector3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn brute_closest(mesh: &SurfaceMesh, p: &Vector3<f64>) -> (f64, usize, Vector3<f64>) {
    let mut best = (f64::INFINITY, usize::MAX, Vector3::zeros());
    for t in 0..mesh.triangles().len() {
        let [a, b, c] = mesh.triangle(t);
        let (q, _) = closest_point_on_triangle(p, &a, &b, &c);
        let d2 = (p - q).norm_squared();
        if d2 < best.0 {
            best = (d2, t, q);
        }
    }
    best
}

fn brute_ray(mesh: &SurfaceMesh, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for t in 0..mesh.triangles().len() {
        let [a, b, c] = mesh.triangle(t);
        if let Some(h) = ray_triangle(o, d, &a, &b, &c) {
            if best.is_none_or(|(bt, _)| h < bt) {
                best = Some((h, t));
            }
        }
    }
    best
}

fn random_unit(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

#[test]
fn unit_sphere_normals_match_positions() {
    let off = shapes::icosphere(1.0, 7).to_off_string();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sphere.off");
    std::fs::write(&path, off).unwrap();
    let mesh = load_mesh(&path).unwrap();
    for (v, n) in mesh.vertices().iter().zip(mesh.vertex_normals()) {
        assert!((n - v.normalize()).norm() < 1e-3);
        assert!((n.norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn out_of_range_face_index_is_degenerate() {
    let mut text = String::from("OFF\n100 1 0\n");
    for i in 0..100 {
        text.push_str(&format!("{} {} 0\n", i as f64 * 0.01, (i % 7) as f64 * 0.01));
    }
    text.push_str("3 0 1 99999\n");
    assert!(matches!(
        SurfaceMesh::from_off_str(&text),
        Err(SurfaceError::DegenerateMesh(_))
    ));
}

#[test]
fn missing_file_and_bad_text_are_errors() {
    assert!(matches!(load_mesh("/nonexistent/mesh.off"), Err(SurfaceError::Io(_))));
    assert!(matches!(
        SurfaceMesh::from_off_str("OFF\n1 1\n0 0\n"),
        Err(SurfaceError::Parse { .. })
    ));
}

#[test]
fn bundled_phantom_matches_manifest() {
    let manifest = MeshManifest::bundled();
    let mesh = phantom();
    assert_eq!(mesh.vertices().len(), manifest.vertex_count);
    assert_eq!(mesh.triangles().len(), manifest.triangle_count);
    let (lo, hi) = mesh.bounding_box();
    assert_eq!(<[f64; 3]>::from(lo), manifest.bbox_min);
    assert_eq!(<[f64; 3]>::from(hi), manifest.bbox_max);
    assert_eq!(MeshManifest::describe("phantom-abdomen", PHANTOM_OFF).unwrap(), manifest);
    // The generator reproduces the bundled bytes.
    assert_eq!(shapes::phantom_shape().to_off_string(), PHANTOM_OFF);
    let [a, b, c] = manifest.semi_axes;
    assert_eq!(<[f64; 3]>::from(hi), [a, b, c]);
    assert_eq!(<[f64; 3]>::from(lo), [-a, -b, 0.0]);
}

#[test]
fn phantom_normals_point_away_from_centroid() {
    let mesh = phantom();
    let c = mesh.centroid();
    for (v, n) in mesh.vertices().iter().zip(mesh.vertex_normals()) {
        assert!(n.dot(&(v - c)) > 0.0);
    }
}

#[test]
fn closest_point_on_interior_is_identity() {
    let mesh = shapes::flat_patch(0.2, 4, 0.0);
    let p = Vector3::new(0.013, -0.027, 0.0);
    let sp = mesh.closest_point(&p);
    assert!(sp.distance < 1e-15);
    assert!((sp.point - p).norm() < 1e-15);
    assert!((sp.normal - Vector3::z()).norm() < 1e-15);
}

#[test]
fn sphere_centre_is_unit_distance_from_a_vertex() {
    let mesh = shapes::icosphere(1.0, 2);
    let sp = mesh.closest_point(&Vector3::zeros());
    // Closest point is on a face; every face is within the unit ball.
    assert!(sp.distance <= 1.0 && sp.distance > 0.95);
    let nearest_vertex = mesh
        .vertices()
        .iter()
        .map(|v| v.norm())
        .fold(f64::INFINITY, f64::min);
    assert!((nearest_vertex - 1.0).abs() < 1e-12);
}

#[test]
fn closest_point_matches_brute_force_on_phantom() {
    let mesh = phantom();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let p = Vector3::new(
            rng.random_range(-0.3..0.3),
            rng.random_range(-0.25..0.25),
            rng.random_range(-0.1..0.25),
        );
        let sp = mesh.closest_point(&p);
        let (d2, t, q) = brute_closest(&mesh, &p);
        assert_eq!(sp.triangle, t);
        assert_eq!(sp.point, q);
        assert_eq!(sp.distance, d2.sqrt());
    }
}

#[test]
fn raycast_matches_brute_force_on_phantom() {
    let mesh = phantom();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut hits = 0;
    for _ in 0..100 {
        let o = Vector3::new(
            rng.random_range(-0.3..0.3),
            rng.random_range(-0.25..0.25),
            rng.random_range(0.0..0.3),
        );
        // Aim at a random point near the phantom so most rays hit.
        let aim = Vector3::new(
            rng.random_range(-0.15..0.15),
            rng.random_range(-0.12..0.12),
            rng.random_range(0.0..0.1),
        );
        let d = if rng.random_bool(0.8) {
            (aim - o).normalize()
        } else {
            random_unit(&mut rng)
        };
        let got = mesh.raycast(&o, &d).map(|h| (h.distance, h.triangle));
        assert_eq!(got, brute_ray(&mesh, &o, &d));
        hits += got.is_some() as usize;
    }
    assert!(hits > 50, "{hits}");
}

#[test]
fn raycast_flat_patch() {
    let mesh = shapes::flat_patch(0.2, 4, 0.0);
    let o = Vector3::new(0.01, 0.02, 0.05);
    let hit = mesh.raycast(&o, &-Vector3::z()).unwrap();
    assert!((hit.distance - 0.05).abs() < 1e-15);
    assert!(mesh.raycast(&o, &Vector3::z()).is_none());
    // Axis-parallel ray along the sheet misses.
    assert!(mesh.raycast(&o, &Vector3::x()).is_none());
}

#[test]
fn probe_pose_examples() {
    let mesh = shapes::flat_patch(0.2, 4, 0.0);
    let c = ContactPose::on_mesh(&mesh, &Vector3::new(0.01, 0.0, 0.0), 0.0, 0.0);
    let pose = probe_pose_at(&mesh, &c).unwrap();
    assert!((pose.position - c.surface_point).norm() < 1e-15);
    assert!((pose.axis() + Vector3::z()).norm() < 1e-15);

    let pressed = ContactPose {
        indentation: 0.01,
        ..c
    };
    let p = probe_pose_at(&mesh, &pressed).unwrap();
    assert!((p.position - (c.surface_point - Vector3::z() * 0.01)).norm() < 1e-15);

    let rolled = ContactPose {
        axial_roll: std::f64::consts::FRAC_PI_2,
        ..c
    };
    let r = probe_pose_at(&mesh, &rolled).unwrap();
    let rel = pose.orientation.inverse() * r.orientation;
    assert!((rel.angle() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    assert!((rel.axis().unwrap().into_inner() - Vector3::z()).norm() < 1e-12);

    let off = ContactPose {
        surface_point: Vector3::new(0.0, 0.0, 0.01),
        ..c
    };
    assert!(matches!(
        probe_pose_at(&mesh, &off),
        Err(SurfaceError::OffSurface { .. })
    ));
}

#[test]
fn sweep_examples() {
    let flat = shapes::flat_patch(0.3, 6, 0.0);
    let a = Vector3::new(-0.05, 0.01, 0.0);
    assert_eq!(
        generate_sweep(&flat, &a, &a, 0.02, 0.0),
        Err(SurfaceError::EmptyPath)
    );
    let b = Vector3::new(0.05, 0.01, 0.0);
    let path = generate_sweep(&flat, &a, &b, 0.02, 0.0).unwrap();
    assert_eq!(path.len(), 6);
    assert!(path.spacing_holds());
    for w in &path.waypoints {
        let p = w.surface_point;
        assert!((p.y - 0.01).abs() < 1e-15 && p.z == 0.0);
    }
    let far = Vector3::new(0.0, 0.0, 0.2);
    assert!(matches!(
        generate_sweep(&flat, &a, &far, 0.02, 0.0),
        Err(SurfaceError::OffSurface { .. })
    ));

    let mesh = phantom();
    let apex = Vector3::new(0.0, 0.0, 0.10);
    let flank = Vector3::new(0.17, 0.0, 0.03);
    let path = generate_sweep(&mesh, &apex, &flank, 0.01, 0.002).unwrap();
    let c = mesh.centroid();
    for w in &path.waypoints {
        assert!(w.normal.dot(&(w.surface_point - c)) > 0.0);
        let probe = probe_pose_at(&mesh, w).unwrap();
        assert!((probe.axis().dot(&w.normal) + 1.0).abs() < 1e-9);
    }
    assert!(path.spacing_holds());
    assert!(path.len() >= ((flank - apex).norm() / 0.01).ceil() as usize);
}

#[test]
fn resample_gives_requested_count() {
    let mesh = phantom();
    let path = generate_sweep(
        &mesh,
        &Vector3::new(-0.05, -0.06, 0.1),
        &Vector3::new(-0.05, 0.06, 0.1),
        0.005,
        0.0,
    )
    .unwrap();
    let r = path.resample(&mesh, 10).unwrap();
    assert_eq!(r.len(), 10);
    assert!((r.waypoints[0].surface_point - path.waypoints[0].surface_point).norm() < 1e-12);
}

#[test]
fn save_load_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = phantom();
    let a = dir.path().join("a.off");
    let b = dir.path().join("b.off");
    save_mesh(&mesh, &a).unwrap();
    let again = load_mesh(&a).unwrap();
    save_mesh(&again, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(mesh.vertices(), again.vertices());
    assert_eq!(mesh.triangles(), again.triangles());
    assert_eq!(mesh.vertex_normals(), again.vertex_normals());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn closest_point_no_farther_than_any_vertex(
        x in -0.3f64..0.3, y in -0.25f64..0.25, z in -0.1f64..0.3
    ) {
        let mesh = phantom_cached();
        let p = Vector3::new(x, y, z);
        let sp = mesh.closest_point(&p);
        for v in mesh.vertices() {
            prop_assert!(sp.distance <= (p - v).norm());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_sweeps_face_the_surface(
        sx in -0.15f64..0.15, sy in -0.11f64..0.11,
        ex in -0.15f64..0.15, ey in -0.11f64..0.11,
        spacing in 0.004f64..0.03, indentation in 0.0f64..0.01, roll in -3.0f64..3.0,
    ) {
        let mesh = phantom_cached();
        let start = Vector3::new(sx, sy, 0.12);
        let end = Vector3::new(ex, ey, 0.12);
        prop_assume!((end - start).norm() > 1e-3);
        let start = mesh.closest_point(&start).point;
        let end = mesh.closest_point(&end).point;
        prop_assume!((end - start).norm() > 1e-3);
        let path = generate_sweep(&mesh, &start, &end, spacing, indentation).unwrap().with_roll(roll);
        prop_assert!(path.spacing_holds());
        prop_assert!(path.len() >= ((end - start).norm() / spacing).ceil() as usize);
        for w in &path.waypoints {
            let pose = probe_pose_at(&mesh, w).unwrap();
            prop_assert!((pose.axis().dot(&w.normal) + 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn raycast_back_onto_surface_is_short(
        x in -0.15f64..0.15, y in -0.11f64..0.11, eps_exp in 0usize..2
    ) {
        let eps = [1e-4, 1e-3][eps_exp];
        let mesh = phantom_cached();
        let sp = mesh.closest_point(&Vector3::new(x, y, 0.2));
        let origin = sp.point + sp.normal * eps;
        let hit = mesh.raycast(&origin, &-sp.normal);
        prop_assert!(hit.is_some());
        prop_assert!(hit.unwrap().distance <= 2.0 * eps);
    }
}

fn phantom_cached() -> &'static SurfaceMesh {
    static MESH: std::sync::OnceLock<SurfaceMesh> = std::sync::OnceLock::new();
    MESH.get_or_init(phantom)
}
