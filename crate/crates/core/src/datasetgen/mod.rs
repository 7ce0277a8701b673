//! Policy-driven synthesis of composed objects and the datasets built from
//! them: synthetic training sets and rotated target sets.

mod demo;
mod export;

pub use demo::demo_target_mesh;
pub use export::{export_dataset, import_dataset, Manifest, ManifestEntry, MANIFEST_FILE};

use nalgebra::{Rotation3, Unit};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AffineTransform, Mat3, Plane, Point3, PrimitiveKind, SdfNode, TransformParams};
use crate::meshing::{
    canonical_mesh, clip_mesh, merge_meshes, normalize_mesh_with, transform_mesh, Normalization,
    TriangleMesh,
};
use crate::policy::{GenerationRanges, Policy};
use crate::sampling::{
    depth_to_cloud, random_camera, random_direction, random_rotation, render_depth,
    sample_surface, CameraIntrinsics, CameraPose, PointCloud, DEFAULT_CAMERA_RADIUS,
};
use crate::seed;

/// Consecutive failed draws after which [`generate_object`] gives up.
pub const MAX_ATTEMPTS: usize = 10;

/// Default number of objects per synthetic dataset.
pub const DEFAULT_OBJECTS: usize = 400;
/// Default number of points per cloud.
pub const DEFAULT_POINTS: usize = 256;
/// Default number of rotated copies in a target dataset.
pub const DEFAULT_TARGET_AUGMENTATIONS: usize = 100;

/// One transformed and truncated primitive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartSpec {
    pub kind: PrimitiveKind,
    pub plane: Plane,
    pub transform: AffineTransform,
}

impl PartSpec {
    /// Implicit form of the part before normalization.
    pub fn to_sdf(&self) -> SdfNode {
        SdfNode::from(self.kind.canonical())
            .transformed(self.transform.clone())
            .truncated(self.plane)
    }

    /// Transformed canonical mesh clipped by the part's plane.
    pub fn mesh(&self) -> Result<TriangleMesh> {
        let placed = transform_mesh(canonical_mesh(self.kind), &self.transform)?;
        clip_mesh(&placed, &self.plane)
    }
}

/// Recipe of a composed object: the union of its parts, followed by the
/// normalization that maps the merged mesh into the unit ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub normalization: Normalization,
    pub parts: Vec<PartSpec>,
}

impl ObjectSpec {
    /// Implicit form of the normalized object.
    pub fn to_sdf(&self) -> SdfNode {
        SdfNode::Union(self.parts.iter().map(PartSpec::to_sdf).collect())
            .transformed(self.normalization.as_transform())
    }
}

/// Builds the normalized merged mesh of `parts`. Fails with
/// [`Error::EmptySurface`] when a part is clipped away entirely.
pub fn assemble(parts: Vec<PartSpec>) -> Result<(ObjectSpec, TriangleMesh)> {
    if parts.is_empty() {
        return Err(Error::InvalidParameter("an object needs at least one part".into()));
    }
    let meshes = parts.iter().map(PartSpec::mesh).collect::<Result<Vec<_>>>()?;
    let merged = merge_meshes(&meshes)?;
    let (mesh, normalization) = normalize_mesh_with(&merged)?;
    Ok((
        ObjectSpec {
            normalization,
            parts,
        },
        mesh,
    ))
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn draw_transform(ranges: &GenerationRanges, rng: &mut impl Rng) -> Result<AffineTransform> {
    let axis = Unit::new_normalize(random_direction(rng));
    let angle = uniform(rng, 0.0, ranges.max_rotation);
    let rotation = Rotation3::from_axis_angle(&axis, angle).into_inner();
    let translation = Point3::from_fn(|_, _| uniform(rng, -ranges.translation, ranges.translation));
    let (lo, hi) = ranges.scale_interval();
    let alpha = uniform(rng, lo, hi);
    let shear = ranges.shear.map(|s| uniform(rng, -s, s));
    let stretch = std::array::from_fn(|axis| {
        let (lo, hi) = ranges.stretch_interval(axis);
        uniform(rng, lo, hi)
    });
    AffineTransform::new(TransformParams {
        alpha,
        rotation,
        shear,
        stretch,
        translation,
    })
}

fn draw_part(ranges: &GenerationRanges, rng: &mut impl Rng) -> Result<PartSpec> {
    let kind = PrimitiveKind::ALL[rng.random_range(0..PrimitiveKind::ALL.len())];
    let transform = draw_transform(ranges, rng)?;
    let center = transform.inverse_apply(&Point3::zeros());
    let radius = transform_mesh(canonical_mesh(kind), &transform)?
        .vertices
        .iter()
        .map(|v| (v - center).norm())
        .fold(0.0, f64::max);
    let normal = random_direction(rng);
    let depth = uniform(rng, 0.0, ranges.truncation);
    let plane = Plane::new(center + normal * ((1.0 - depth) * radius), normal)?;
    Ok(PartSpec {
        kind,
        plane,
        transform,
    })
}

/// Draws one composed object within `ranges`. A draw in which some part is
/// clipped away entirely is discarded and the whole object redrawn.
pub fn generate_object(
    ranges: &GenerationRanges,
    rng: &mut impl Rng,
) -> Result<(ObjectSpec, TriangleMesh)> {
    ranges.validate()?;
    for _ in 0..MAX_ATTEMPTS {
        let parts = (0..ranges.primitive_count)
            .map(|_| draw_part(ranges, rng))
            .collect::<Result<Vec<_>>>()?;
        match assemble(parts) {
            Err(Error::EmptySurface) => continue,
            other => return other,
        }
    }
    Err(Error::RetryExhausted {
        index: 0,
        attempts: MAX_ATTEMPTS,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    pub mesh: TriangleMesh,
    pub cloud: PointCloud,
    /// Generating recipe; `None` for entries derived from external meshes.
    pub spec: Option<ObjectSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub seed: u64,
    pub policy: Option<Policy>,
    pub points_per_cloud: usize,
    pub entries: Vec<DatasetEntry>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clouds(&self) -> Vec<PointCloud> {
        self.entries.iter().map(|e| e.cloud.clone()).collect()
    }

    /// Checks that every cloud has `points_per_cloud` points and every mesh
    /// is normalized.
    pub fn validate(&self) -> Result<()> {
        for (i, e) in self.entries.iter().enumerate() {
            if e.cloud.len() != self.points_per_cloud {
                return Err(Error::SizeMismatch {
                    left: e.cloud.len(),
                    right: self.points_per_cloud,
                });
            }
            let max = e.mesh.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max);
            if (max - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "entry {i}: mesh is not normalized (max norm {max})"
                )));
            }
        }
        Ok(())
    }

    /// Stable 64-bit digest of the name, seed, policy and every entry.
    pub fn fingerprint(&self) -> u64 {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(self.name.as_bytes());
        bytes.extend_from_slice(&self.seed.to_le_bytes());
        if let Some(p) = &self.policy {
            bytes.extend_from_slice(p.labels());
        }
        bytes.extend_from_slice(&(self.points_per_cloud as u64).to_le_bytes());
        for e in &self.entries {
            for v in e.mesh.vertices.iter().chain(&e.cloud.points) {
                for c in v.iter() {
                    bytes.extend_from_slice(&c.to_bits().to_le_bytes());
                }
            }
            for f in &e.mesh.faces {
                for i in f {
                    bytes.extend_from_slice(&i.to_le_bytes());
                }
            }
            if let Some(spec) = &e.spec {
                bytes.extend_from_slice(&serde_json::to_vec(spec).expect("spec serializes"));
            }
        }
        seed::stable_hash(&bytes)
    }
}

fn check_sizes(n: usize, v: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("dataset needs at least one object".into()));
    }
    if v < 8 {
        return Err(Error::InvalidParameter(format!(
            "clouds need at least 8 points, got {v}"
        )));
    }
    Ok(())
}

fn synth_entry(ranges: &GenerationRanges, v: usize, seed: u64, index: usize) -> Result<DatasetEntry> {
    let mut rng = seed::sub_rng(seed, index as u64);
    let (spec, mesh) = generate_object(ranges, &mut rng).map_err(|e| match e {
        Error::RetryExhausted { attempts, .. } => Error::RetryExhausted { index, attempts },
        other => other,
    })?;
    let cloud = sample_surface(&mesh, v, &mut rng)?;
    Ok(DatasetEntry {
        mesh,
        cloud,
        spec: Some(spec),
    })
}

/// `n_objects` independent objects drawn under `policy`, each with a cloud
/// of `v` surface samples. Object `i` uses the seed `derive(seed, i)`, so
/// the result does not depend on scheduling.
pub fn generate_dataset(policy: &Policy, n_objects: usize, v: usize, seed: u64) -> Result<Dataset> {
    check_sizes(n_objects, v)?;
    let ranges = policy.ranges();
    let entries = (0..n_objects)
        .into_par_iter()
        .map(|i| synth_entry(&ranges, v, seed, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        name: format!("synthetic-{policy}"),
        seed,
        policy: Some(*policy),
        points_per_cloud: v,
        entries,
    })
}

/// The clouds of [`generate_dataset`] without keeping the meshes around.
pub fn generate_clouds(policy: &Policy, n_objects: usize, v: usize, seed: u64) -> Result<Vec<PointCloud>> {
    check_sizes(n_objects, v)?;
    let ranges = policy.ranges();
    (0..n_objects)
        .into_par_iter()
        .map(|i| synth_entry(&ranges, v, seed, i).map(|e| e.cloud))
        .collect()
}

/// Normalizes `mesh` and produces `n_aug` randomly rotated copies, each with
/// a fresh surface sampling of `v` points.
pub fn build_target_dataset(mesh: &TriangleMesh, n_aug: usize, v: usize, seed: u64) -> Result<Dataset> {
    let rotations: Vec<Mat3> = (0..n_aug)
        .map(|i| random_rotation(&mut seed::sub_rng(seed, i as u64)))
        .collect();
    build_target_dataset_with_rotations(mesh, &rotations, v, seed)
}

/// [`build_target_dataset`] with caller-chosen rotations.
pub fn build_target_dataset_with_rotations(
    mesh: &TriangleMesh,
    rotations: &[Mat3],
    v: usize,
    seed: u64,
) -> Result<Dataset> {
    check_sizes(rotations.len(), v)?;
    mesh.validate()?;
    if !(mesh.area() > 0.0) {
        return Err(Error::DegenerateMesh("target mesh has zero area".into()));
    }
    let (base, _) = normalize_mesh_with(mesh)?;
    let entries = rotations
        .par_iter()
        .enumerate()
        .map(|(i, rot)| {
            let mut rng = seed::sub_rng(seed::derive(seed, u64::MAX), i as u64);
            let rotated = TriangleMesh {
                vertices: base.vertices.iter().map(|p| rot * p).collect(),
                faces: base.faces.clone(),
            };
            let cloud = sample_surface(&rotated, v, &mut rng)?;
            Ok(DatasetEntry {
                mesh: rotated,
                cloud,
                spec: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        name: "target".into(),
        seed,
        policy: None,
        points_per_cloud: v,
        entries,
    })
}

/// Registration-style sample: a full surface sampling in the object frame
/// and a single-view depth cloud of the object posed by `(rotation,
/// translation)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedPair {
    pub source: PointCloud,
    pub target: PointCloud,
    pub rotation: Mat3,
    pub translation: Point3,
    pub camera: CameraPose,
}

/// Maximum per-axis translation applied by [`render_pair`].
pub const RENDER_TRANSLATION: f64 = 0.2;

pub fn render_pair(entry: &DatasetEntry, seed: u64) -> Result<RenderedPair> {
    let mut rng = seed::rng(seed);
    let v = entry.cloud.len();
    let source = sample_surface(&entry.mesh, v, &mut rng)?;
    let rotation = random_rotation(&mut rng);
    let translation =
        Point3::from_fn(|_, _| uniform(&mut rng, -RENDER_TRANSLATION, RENDER_TRANSLATION));
    let posed = TriangleMesh {
        vertices: entry
            .mesh
            .vertices
            .iter()
            .map(|p| rotation * p + translation)
            .collect(),
        faces: entry.mesh.faces.clone(),
    };
    let (r_min, r_max) = DEFAULT_CAMERA_RADIUS;
    let camera = random_camera(&mut rng, r_min, r_max, CameraIntrinsics::default())?;
    let depth = render_depth(&posed, &camera)?;
    let target = depth_to_cloud(&depth, &camera, v, &mut rng)?;
    Ok(RenderedPair {
        source,
        target,
        rotation,
        translation,
        camera,
    })
}

#[cfg(test)]
mod tests;
