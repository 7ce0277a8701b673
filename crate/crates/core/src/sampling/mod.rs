//! Point clouds from meshes: area-weighted surface sampling, random
//! rotations, and partial views through a z-buffer depth renderer.

mod depth;
pub mod io;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Mat3, Point3};
use crate::meshing::TriangleMesh;

pub use depth::{
    depth_to_cloud, random_camera, render_depth, CameraIntrinsics, CameraPose, DepthMap,
    DEFAULT_CAMERA_RADIUS,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("point cloud needs at least one point".into()));
        }
        if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite("point cloud coordinate".into()));
        }
        Ok(PointCloud { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `p -> rotation * p + translation` for every point.
    pub fn transformed(&self, rotation: &Mat3, translation: &Point3) -> PointCloud {
        PointCloud {
            points: self
                .points
                .iter()
                .map(|p| rotation * p + translation)
                .collect(),
        }
    }

    /// Flat `[x0, y0, z0, x1, ...]` view.
    pub fn flat(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
    }
}

/// Draws `n` points uniformly over the surface: triangles are chosen with
/// probability proportional to area, then a point is placed uniformly
/// inside the chosen triangle.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, rng: &mut impl Rng) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be >= 1".into()));
    }
    let areas: Vec<f64> = (0..mesh.faces.len()).map(|f| mesh.triangle_area(f)).collect();
    let total: f64 = areas.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::DegenerateMesh("total surface area is zero".into()));
    }
    let pick = WeightedIndex::new(&areas)
        .map_err(|e| Error::DegenerateMesh(format!("triangle weights: {e}")))?;
    let points = (0..n)
        .map(|_| {
            let [a, b, c] = mesh.triangle(pick.sample(rng));
            let s = rng.random::<f64>().sqrt();
            let r = rng.random::<f64>();
            a * (1.0 - s) + b * (s * (1.0 - r)) + c * (s * r)
        })
        .collect();
    Ok(PointCloud { points })
}

/// Uniform rotation over SO(3) from a normalized Gaussian quaternion.
pub fn random_rotation(rng: &mut impl Rng) -> Mat3 {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let quat = nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]);
        if quat.norm() > 1e-12 {
            return nalgebra::UnitQuaternion::from_quaternion(quat)
                .to_rotation_matrix()
                .into_inner();
        }
    }
}

/// Uniform direction on the unit sphere.
pub fn random_direction(rng: &mut impl Rng) -> Point3 {
    loop {
        let v = Point3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn two_triangles() -> TriangleMesh {
        // areas 1 and 3
        TriangleMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(2.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(10.0, 0.0, 0.0),
                Point3::new(13.0, 0.0, 0.0),
                Point3::new(10.0, 2.0, 0.0),
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap()
    }

    #[test]
    fn area_weighting_binomial() {
        let cloud = sample_surface(&two_triangles(), 40_000, &mut seed::rng(1)).unwrap();
        let big = cloud.points.iter().filter(|p| p.x >= 10.0).count();
        let frac = big as f64 / 40_000.0;
        assert!((0.735..=0.765).contains(&frac), "{frac}");
    }

    #[test]
    fn chi_square_over_twenty_triangles() {
        // strip of 20 triangles with areas 1..=20
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for k in 0..20u32 {
            let w = f64::from(k + 1);
            let x0 = 100.0 * f64::from(k);
            vertices.extend([
                Point3::new(x0, 0.0, 0.0),
                Point3::new(x0 + 2.0 * w, 0.0, 0.0),
                Point3::new(x0, 1.0, 0.0),
            ]);
            faces.push([3 * k, 3 * k + 1, 3 * k + 2]);
        }
        let mesh = TriangleMesh::new(vertices, faces).unwrap();
        let n = 100_000;
        let cloud = sample_surface(&mesh, n, &mut seed::rng(20)).unwrap();
        let mut counts = [0usize; 20];
        for p in &cloud.points {
            counts[(p.x / 100.0).floor() as usize] += 1;
        }
        let total_area: f64 = (1..=20).map(f64::from).sum();
        let chi2: f64 = counts
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                let e = n as f64 * (k + 1) as f64 / total_area;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        // chi-square critical value, 19 degrees of freedom, alpha = 0.001
        assert!(chi2 < 43.820, "chi2 = {chi2}");
    }

    #[test]
    fn single_sample_lies_on_a_triangle_plane() {
        let mesh = crate::meshing::canonical_mesh(crate::geometry::PrimitiveKind::Icosahedron);
        let p = sample_surface(mesh, 1, &mut seed::rng(3)).unwrap().points[0];
        let best = (0..mesh.faces.len())
            .map(|f| {
                let [a, b, c] = mesh.triangle(f);
                let n = (b - a).cross(&(c - a)).normalize();
                n.dot(&(p - a)).abs()
            })
            .fold(f64::INFINITY, f64::min);
        assert!(best <= 1e-9);
    }

    #[test]
    fn sampling_is_deterministic() {
        let mesh = two_triangles();
        let a = sample_surface(&mesh, 100, &mut seed::rng(5)).unwrap();
        let b = sample_surface(&mesh, 100, &mut seed::rng(5)).unwrap();
        assert_eq!(a.flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                   b.flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn degenerate_mesh_rejected() {
        let flat = TriangleMesh::new(
            vec![Point3::zeros(), Point3::x(), Point3::x() * 2.0],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(matches!(
            sample_surface(&flat, 10, &mut seed::rng(0)),
            Err(Error::DegenerateMesh(_))
        ));
    }

    #[test]
    fn rotations_are_proper() {
        let mut rng = seed::rng(8);
        for _ in 0..1000 {
            let r = random_rotation(&mut rng);
            assert!((r.transpose() * r - Mat3::identity()).abs().max() < 1e-9);
            assert!((r.determinant() - 1.0).abs() < 1e-9);
        }
        assert_eq!(random_rotation(&mut seed::rng(2)), random_rotation(&mut seed::rng(2)));
    }

    #[test]
    fn rotated_pole_mean_is_near_zero() {
        let mut rng = seed::rng(10);
        let n = 10_000;
        let mean = (0..n)
            .map(|_| random_rotation(&mut rng) * Point3::z())
            .sum::<Point3>()
            / n as f64;
        assert!(mean.abs().max() < 0.05, "{mean:?}");
    }

    #[test]
    fn rotations_preserve_distances() {
        let mesh = crate::meshing::canonical_mesh(crate::geometry::PrimitiveKind::Torus);
        let cloud = sample_surface(mesh, 64, &mut seed::rng(6)).unwrap();
        let r = random_rotation(&mut seed::rng(7));
        let moved = cloud.transformed(&r, &Point3::zeros());
        for i in 0..64 {
            for j in 0..64 {
                let d0 = (cloud.points[i] - cloud.points[j]).norm();
                let d1 = (moved.points[i] - moved.points[j]).norm();
                assert!((d0 - d1).abs() < 1e-9);
            }
        }
    }
}
