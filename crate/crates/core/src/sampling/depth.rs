use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{random_direction, PointCloud};
use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::meshing::TriangleMesh;

/// Camera distance range used for unit-normalized meshes.
pub const DEFAULT_CAMERA_RADIUS: (f64, f64) = (2.2, 4.0);

const NEAR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    /// Focal length in pixels.
    pub focal: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        CameraIntrinsics {
            focal: 110.0,
            width: 128,
            height: 128,
        }
    }
}

/// Pinhole camera. Camera axes: `right`, `down`, `forward`; pixel `(i, j)`
/// covers `u in [i, i+1)`, `v in [j, j+1)` with the principal point at the
/// image centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: Point3,
    pub target: Point3,
    pub up: Point3,
    pub intrinsics: CameraIntrinsics,
}

impl CameraPose {
    pub fn new(position: Point3, target: Point3, up: Point3, intrinsics: CameraIntrinsics) -> Result<Self> {
        let cam = CameraPose {
            position,
            target,
            up,
            intrinsics,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if (self.target - self.position).norm() < 1e-12 {
            return Err(Error::InvalidParameter("camera position equals its target".into()));
        }
        if !(self.intrinsics.focal > 0.0) || self.intrinsics.width == 0 || self.intrinsics.height == 0 {
            return Err(Error::InvalidParameter("camera intrinsics must be positive".into()));
        }
        Ok(())
    }

    /// `(right, down, forward)` unit axes.
    pub fn axes(&self) -> (Point3, Point3, Point3) {
        let forward = (self.target - self.position).normalize();
        let mut right = forward.cross(&self.up);
        if right.norm() < 1e-9 {
            let alt = if forward.x.abs() < 0.9 { Point3::x() } else { Point3::y() };
            right = forward.cross(&alt);
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        (right, down, forward)
    }

    pub fn to_camera(&self, p: &Point3) -> Point3 {
        let (r, d, f) = self.axes();
        let q = p - self.position;
        Point3::new(r.dot(&q), d.dot(&q), f.dot(&q))
    }

    pub fn to_world(&self, c: &Point3) -> Point3 {
        let (r, d, f) = self.axes();
        self.position + r * c.x + d * c.y + f * c.z
    }

    /// Continuous pixel coordinates of a camera-frame point.
    pub fn project(&self, c: &Point3) -> (f64, f64) {
        let k = &self.intrinsics;
        (
            k.focal * c.x / c.z + k.width as f64 / 2.0,
            k.focal * c.y / c.z + k.height as f64 / 2.0,
        )
    }

    /// Camera-frame point at depth `z` behind pixel coordinates `(u, v)`.
    pub fn unproject(&self, u: f64, v: f64, z: f64) -> Point3 {
        let k = &self.intrinsics;
        Point3::new(
            (u - k.width as f64 / 2.0) * z / k.focal,
            (v - k.height as f64 / 2.0) * z / k.focal,
            z,
        )
    }
}

/// Per-pixel camera-frame depth; `f64::INFINITY` marks pixels with no hit.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
}

impl DepthMap {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let z = self.depth[j * self.width + i];
        z.is_finite().then_some(z)
    }

    /// Hit pixels as `(i, j, depth)` in row-major order.
    pub fn hits(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.depth
            .iter()
            .enumerate()
            .filter(|(_, z)| z.is_finite())
            .map(|(k, &z)| (k % self.width, k / self.width, z))
    }

    pub fn hit_count(&self) -> usize {
        self.hits().count()
    }
}

/// Z-buffer rasterization with perspective-correct depth. Pixels are
/// sampled at their centres; triangles reaching behind the camera are
/// skipped.
pub fn render_depth(mesh: &TriangleMesh, cam: &CameraPose) -> Result<DepthMap> {
    cam.validate()?;
    let (w, h) = (cam.intrinsics.width, cam.intrinsics.height);
    let mut depth = vec![f64::INFINITY; w * h];
    let cam_pts: Vec<Point3> = mesh.vertices.iter().map(|v| cam.to_camera(v)).collect();
    let mut covered = false;

    for f in &mesh.faces {
        let c = f.map(|i| cam_pts[i as usize]);
        if c.iter().any(|p| p.z <= NEAR) {
            continue;
        }
        let s = c.map(|p| cam.project(&p));
        let area = edge(s[0], s[1], s[2]);
        if area == 0.0 || !area.is_finite() {
            continue;
        }
        let umin = s.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let umax = s.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let vmin = s.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let vmax = s.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let i0 = (umin - 0.5).ceil().max(0.0) as usize;
        let j0 = (vmin - 0.5).ceil().max(0.0) as usize;
        let i1 = (umax - 0.5).floor().min(w as f64 - 1.0);
        let j1 = (vmax - 0.5).floor().min(h as f64 - 1.0);
        if i1 < 0.0 || j1 < 0.0 {
            continue;
        }
        let (i1, j1) = (i1 as usize, j1 as usize);
        let inv_z = c.map(|p| 1.0 / p.z);
        for j in j0..=j1 {
            for i in i0..=i1 {
                let p = (i as f64 + 0.5, j as f64 + 0.5);
                let b = [
                    edge(s[1], s[2], p) / area,
                    edge(s[2], s[0], p) / area,
                    edge(s[0], s[1], p) / area,
                ];
                if b.iter().any(|&x| x < 0.0) {
                    continue;
                }
                let z = 1.0 / (b[0] * inv_z[0] + b[1] * inv_z[1] + b[2] * inv_z[2]);
                let slot = &mut depth[j * w + i];
                if z < *slot {
                    *slot = z;
                    covered = true;
                }
            }
        }
    }
    if !covered {
        return Err(Error::NothingVisible);
    }
    Ok(DepthMap {
        width: w,
        height: h,
        depth,
    })
}

fn edge(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)
}

/// Back-projects hit pixel centres to world space and draws `n` of them,
/// without replacement when there are enough hits and with replacement
/// otherwise.
pub fn depth_to_cloud(
    depth: &DepthMap,
    cam: &CameraPose,
    n: usize,
    rng: &mut impl Rng,
) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be >= 1".into()));
    }
    let hits: Vec<(usize, usize, f64)> = depth.hits().collect();
    if hits.is_empty() {
        return Err(Error::EmptyDepth);
    }
    let chosen: Vec<usize> = if hits.len() >= n {
        rand::seq::index::sample(rng, hits.len(), n).into_vec()
    } else {
        (0..n).map(|_| rng.random_range(0..hits.len())).collect()
    };
    let points = chosen
        .into_iter()
        .map(|k| {
            let (i, j, z) = hits[k];
            cam.to_world(&cam.unproject(i as f64 + 0.5, j as f64 + 0.5, z))
        })
        .collect();
    Ok(PointCloud { points })
}

/// Camera on a uniformly random direction at a uniformly random distance in
/// `[r_min, r_max]`, looking at the origin.
pub fn random_camera(
    rng: &mut impl Rng,
    r_min: f64,
    r_max: f64,
    intrinsics: CameraIntrinsics,
) -> Result<CameraPose> {
    if !(r_min > 0.0 && r_min <= r_max) {
        return Err(Error::InvalidParameter(format!(
            "camera radius range [{r_min}, {r_max}] is invalid"
        )));
    }
    let dir = random_direction(rng);
    let radius = if r_min == r_max {
        r_min
    } else {
        rng.random_range(r_min..=r_max)
    };
    CameraPose::new(dir * radius, Point3::zeros(), Point3::z(), intrinsics)
}
