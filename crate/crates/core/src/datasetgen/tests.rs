use super::*;
use crate::geometry::PrimitiveKind;
use crate::meshing::io::MeshFormat;
use crate::meshing::GridSpec;
use crate::sampling::io::CloudFormat;

fn zeros() -> Policy {
    Policy::new([0; 11]).unwrap()
}

fn rotation_angle(r: &Mat3) -> f64 {
    ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

#[test]
fn label_zero_objects_have_two_parts_within_the_envelope() {
    let ranges = zeros().ranges();
    let mut rng = seed::rng(5);
    for _ in 0..20 {
        let (spec, mesh) = generate_object(&ranges, &mut rng).unwrap();
        assert_eq!(spec.parts.len(), 2);
        assert_eq!(mesh.component_count(), 2);
        for part in &spec.parts {
            let p = part.transform.params();
            assert!(rotation_angle(&p.rotation) <= ranges.max_rotation + 1e-9);
            assert!(p.translation.iter().all(|t| t.abs() <= ranges.translation));
            let (lo, hi) = ranges.scale_interval();
            assert!((lo..=hi).contains(&p.alpha));
            for axis in 0..3 {
                assert!(p.shear[axis].abs() <= ranges.shear[axis]);
                let (lo, hi) = ranges.stretch_interval(axis);
                assert!((lo..=hi).contains(&p.stretch[axis]));
            }
            // the plane sits at (1 - f) R from the part centre with f <= truncation
            let center = part.transform.inverse_apply(&Point3::zeros());
            let radius = transform_mesh(canonical_mesh(part.kind), &part.transform)
                .unwrap()
                .vertices
                .iter()
                .map(|v| (v - center).norm())
                .fold(0.0, f64::max);
            let offset = -part.plane.sdf(&center);
            assert!(offset >= (1.0 - ranges.truncation) * radius - 1e-9);
            assert!(offset <= radius + 1e-9);
        }
    }
}

#[test]
fn objects_are_deterministic_and_normalized() {
    for labels in [[0; 11], [8; 11], [4, 2, 7, 1, 0, 8, 3, 3, 5, 6, 2]] {
        let ranges = Policy::new(labels).unwrap().ranges();
        let a = generate_object(&ranges, &mut seed::rng(99)).unwrap();
        let b = generate_object(&ranges, &mut seed::rng(99)).unwrap();
        assert_eq!(a, b);
        assert_eq!(serde_json::to_string(&a.0).unwrap(), serde_json::to_string(&b.0).unwrap());
        let max = a.1.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!((max - 1.0).abs() <= 1e-9);
        a.1.validate().unwrap();
    }
}

#[test]
fn spec_sdf_agrees_with_the_part_meshes() {
    let tol = 1.5 * GridSpec::canonical().cell_diagonal();
    let mut rng = seed::rng(17);
    for _ in 0..10 {
        let (spec, _) = generate_object(&Policy::random(&mut rng).ranges(), &mut rng).unwrap();
        for part in &spec.parts {
            let node = part.to_sdf();
            for v in &part.mesh().unwrap().vertices {
                assert!(node.eval(v).abs() <= tol);
            }
        }
    }
}

#[test]
fn normalized_spec_matches_the_normalized_mesh() {
    let ranges = zeros().ranges();
    let (spec, mesh) = generate_object(&ranges, &mut seed::rng(3)).unwrap();
    let node = spec.to_sdf();
    let tol = 1.5 * GridSpec::canonical().cell_diagonal();
    // every vertex lies on some part, so the union is at most the tolerance
    assert!(mesh.vertices.iter().all(|v| node.eval(v) <= tol));
}

#[test]
fn dataset_contract_and_determinism() {
    let p = Policy::new([3; 11]).unwrap();
    let d = generate_dataset(&p, 4, 256, 7).unwrap();
    assert_eq!(d.len(), 4);
    assert!(d.entries.iter().all(|e| e.cloud.len() == 256));
    d.validate().unwrap();
    assert_eq!(d.policy, Some(p));
    let again = generate_dataset(&p, 4, 256, 7).unwrap();
    assert_eq!(d.fingerprint(), again.fingerprint());
    assert_eq!(d, again);
    assert_ne!(d.entries[0].mesh, d.entries[1].mesh);
    assert_ne!(d.fingerprint(), generate_dataset(&p, 4, 256, 8).unwrap().fingerprint());

    let clouds = generate_clouds(&p, 4, 256, 7).unwrap();
    assert_eq!(clouds, d.clouds());

    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let serial = single.install(|| generate_dataset(&p, 4, 256, 7).unwrap());
    assert_eq!(serial.fingerprint(), d.fingerprint());
}

#[test]
fn dataset_preconditions() {
    let p = zeros();
    assert!(generate_dataset(&p, 0, 256, 1).is_err());
    assert!(generate_dataset(&p, 1, 7, 1).is_err());
}

fn coefficient_of_variation(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

/// Extents are measured on the merged composite before normalization; the
/// normalized meshes all share max norm 1, which hides size variation.
#[test]
fn diversity_grows_with_the_labels() {
    for s in 0..3 {
        let cv = |labels: [u8; 11]| {
            let ranges = Policy::new(labels).unwrap().ranges();
            let diagonals: Vec<f64> = (0..100)
                .into_par_iter()
                .map(|i| {
                    let (spec, mesh) = generate_object(&ranges, &mut seed::sub_rng(s, i)).unwrap();
                    let (lo, hi) = mesh.bounding_box().unwrap();
                    (hi - lo).norm() * spec.normalization.scale
                })
                .collect();
            coefficient_of_variation(&diagonals)
        };
        let (low, high) = (cv([0; 11]), cv([8; 11]));
        assert!(low < high, "seed {s}: {low} >= {high}");
    }
}

#[test]
fn target_dataset_contract() {
    let mesh = canonical_mesh(PrimitiveKind::Cone);
    let d = build_target_dataset(mesh, 100, 64, 1).unwrap();
    assert_eq!(d.len(), 100);
    assert!(d.policy.is_none());
    assert!(d.entries.iter().all(|e| e.spec.is_none() && e.cloud.len() == 64));
    d.validate().unwrap();
    assert_eq!(d, build_target_dataset(mesh, 100, 64, 1).unwrap());
}

#[test]
fn identity_target_samples_lie_on_the_input_surface() {
    let mesh = normalize_mesh_with(canonical_mesh(PrimitiveKind::Dodecahedron)).unwrap().0;
    let d = build_target_dataset_with_rotations(&mesh, &[Mat3::identity()], 128, 4).unwrap();
    assert_eq!(d.entries[0].mesh, mesh);
    for p in &d.entries[0].cloud.points {
        assert!(mesh.distance_to(p) <= 1e-9);
    }
}

fn diameter(points: &[Point3]) -> f64 {
    let mut best: f64 = 0.0;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max((a - b).norm());
        }
    }
    best
}

#[test]
fn rotations_preserve_the_diameter() {
    let d = build_target_dataset(canonical_mesh(PrimitiveKind::Icosahedron), 10, 32, 2).unwrap();
    let first = diameter(&d.entries[0].mesh.vertices);
    for e in &d.entries {
        assert!((diameter(&e.mesh.vertices) - first).abs() <= 1e-6);
    }
}

#[test]
fn degenerate_target_rejected() {
    let flat = TriangleMesh::new(
        vec![Point3::zeros(), Point3::x(), Point3::x() * 2.0],
        vec![[0, 1, 2]],
    )
    .unwrap();
    assert!(build_target_dataset(&flat, 2, 16, 0).is_err());
}

#[test]
fn export_import_round_trip() {
    let d = generate_dataset(&Policy::new([2; 11]).unwrap(), 3, 64, 11).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for (mf, cf) in [(MeshFormat::Obj, CloudFormat::Ply), (MeshFormat::Ply, CloudFormat::Xyz)] {
        let out = dir.path().join(format!("{}-{}", mf.extension(), cf.extension()));
        let manifest = export_dataset(&d, &out, mf, cf).unwrap();
        let back = import_dataset(&manifest).unwrap();
        assert_eq!(back, d);
        assert_eq!(import_dataset(&out).unwrap(), d);

        let text = std::fs::read_to_string(&manifest).unwrap();
        let parsed: Manifest = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed.entries.len(), 3);
        assert_eq!(parsed.entries[2].mesh, format!("obj_00002.{}", mf.extension()));
        assert_eq!(parsed.entries[2].cloud, format!("cloud_00002.{}", cf.extension()));
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        let canonical = serde_json::to_string_pretty(&value).unwrap() + "\n";
        assert_eq!(canonical, text);
    }
}

#[test]
fn render_pair_contract() {
    let d = generate_dataset(&Policy::new([5; 11]).unwrap(), 2, 128, 21).unwrap();
    for e in &d.entries {
        let pair = render_pair(e, 4).unwrap();
        assert_eq!(pair, render_pair(e, 4).unwrap());
        let r = pair.rotation;
        assert!((r.transpose() * r - Mat3::identity()).abs().max() <= 1e-9);
        assert!((r.determinant() - 1.0).abs() <= 1e-9);
        assert_eq!(pair.source.len(), 128);
        assert_eq!(pair.target.len(), 128);
        let posed = TriangleMesh {
            vertices: e.mesh.vertices.iter().map(|p| r * p + pair.translation).collect(),
            faces: e.mesh.faces.clone(),
        };
        for p in &pair.target.points {
            assert!(posed.distance_to(p) <= 1e-9);
        }
    }
}

#[test]
fn rendered_sphere_obeys_the_implicit_surface() {
    let sphere = canonical_mesh(PrimitiveKind::Sphere).clone();
    let entry = DatasetEntry {
        cloud: sample_surface(&sphere, 256, &mut seed::rng(0)).unwrap(),
        mesh: sphere,
        spec: None,
    };
    let node = SdfNode::from(PrimitiveKind::Sphere.canonical());
    for s in 0..3 {
        let pair = render_pair(&entry, s).unwrap();
        for p in &pair.target.points {
            let object = pair.rotation.transpose() * (p - pair.translation);
            let footprint = pair.camera.to_camera(p).z / pair.camera.intrinsics.focal;
            assert!(node.eval(&object).abs() <= 2.0 * footprint);
        }
    }
}

#[test]
fn demo_target_is_a_valid_normalized_mesh() {
    let mesh = demo_target_mesh();
    mesh.validate().unwrap();
    assert_eq!(mesh.component_count(), 5);
    let max = mesh.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max);
    assert!((max - 1.0).abs() <= 1e-9);
    assert_eq!(mesh, demo_target_mesh());
}
