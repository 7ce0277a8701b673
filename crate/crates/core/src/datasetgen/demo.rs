use super::{assemble, PartSpec};
use crate::geometry::{AffineTransform, Mat3, Plane, Point3, PrimitiveKind, TransformParams};
use crate::meshing::TriangleMesh;

/// Part of size `size`, elongated per axis by `elongation`, centred at
/// `center`, optionally cut by `plane`.
fn placed(kind: PrimitiveKind, size: f64, elongation: [f64; 3], center: Point3, plane: Option<Plane>) -> PartSpec {
    let alpha = 1.0 / size;
    let stretch = elongation.map(|e| 1.0 / e);
    let translation = Point3::new(
        alpha * stretch[0] * center.x,
        alpha * stretch[1] * center.y,
        alpha * stretch[2] * center.z,
    );
    let transform = AffineTransform::new(TransformParams {
        alpha,
        rotation: Mat3::identity(),
        shear: [0.0; 3],
        stretch,
        translation,
    })
    .expect("demo transform is valid");
    let plane = plane.unwrap_or_else(|| {
        Plane::new(Point3::new(0.0, 0.0, 10.0), Point3::z()).expect("unit normal")
    });
    PartSpec {
        kind,
        plane,
        transform,
    }
}

/// A small animal-like composite used as the default search target: an
/// elongated body with a flattened base, a head, two ears and a tail.
pub fn demo_target_mesh() -> TriangleMesh {
    use PrimitiveKind::*;
    let base = Plane::new(Point3::new(0.0, 0.0, -0.45), -Point3::z()).expect("unit normal");
    let parts = vec![
        placed(Sphere, 0.6, [1.35, 1.0, 0.95], Point3::zeros(), Some(base)),
        placed(Sphere, 0.36, [1.1, 1.0, 1.0], Point3::new(0.75, 0.0, 0.45), None),
        placed(Cylinder, 0.3, [0.35, 0.35, 1.6], Point3::new(0.8, 0.13, 0.95), None),
        placed(Cylinder, 0.3, [0.35, 0.35, 1.6], Point3::new(0.8, -0.13, 0.95), None),
        placed(Icosahedron, 0.16, [1.0, 1.0, 1.0], Point3::new(-0.85, 0.0, 0.15), None),
    ];
    assemble(parts).expect("demo parts are never clipped away").1
}
