//! Triangle meshes of composed shapes: isosurface extraction, cached
//! canonical primitive meshes, vertex transforms, plane clipping and merge.

mod marching_cubes;
mod mc_table;
pub mod io;

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    unit_dodecahedron, unit_icosahedron, unit_octahedron, unit_tetrahedron, AffineTransform,
    Plane, Point3, PrimitiveKind, SdfNode,
};

pub use marching_cubes::marching_cubes;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3>,
    pub faces: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3>, faces: Vec<[u32; 3]>) -> Result<Self> {
        let mesh = TriangleMesh { vertices, faces };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if let Some(v) = self.vertices.iter().find(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::DegenerateMesh(format!("non-finite vertex {v:?}")));
        }
        for (i, f) in self.faces.iter().enumerate() {
            if f.iter().any(|&k| k as usize >= n) {
                return Err(Error::DegenerateMesh(format!(
                    "face {i} {f:?} indexes past {n} vertices"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::DegenerateMesh(format!("face {i} {f:?} repeats a vertex")));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn triangle(&self, face: usize) -> [Point3; 3] {
        self.faces[face].map(|i| self.vertices[i as usize])
    }

    pub fn triangle_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.triangle(face);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.triangle_area(f)).sum()
    }

    /// Divergence-theorem volume; meaningful for closed, outward-wound meshes.
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.map(|i| self.vertices[i as usize]);
                a.dot(&b.cross(&c))
            })
            .sum::<f64>()
            / 6.0
    }

    pub fn bounding_box(&self) -> Option<(Point3, Point3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| {
            (lo.inf(v), hi.sup(v))
        }))
    }

    /// Number of directed half-edges without an opposite twin. Zero for a
    /// closed, consistently wound surface.
    pub fn boundary_edge_count(&self) -> usize {
        let mut edges: HashMap<(u32, u32), i32> = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *edges.entry((a, b)).or_default() += 1;
                *edges.entry((b, a)).or_default() -= 1;
            }
        }
        edges.values().filter(|&&c| c != 0).count() / 2
    }

    /// Number of edge-connected groups of faces.
    pub fn component_count(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.vertices.len()).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for f in &self.faces {
            let a = find(&mut parent, f[0] as usize);
            for &k in &f[1..] {
                let b = find(&mut parent, k as usize);
                parent[b] = a;
            }
        }
        let mut roots: Vec<usize> = self
            .faces
            .iter()
            .map(|f| find(&mut parent, f[0] as usize))
            .collect();
        roots.sort_unstable();
        roots.dedup();
        roots.len()
    }

    /// Euclidean distance from `p` to the nearest triangle (brute force).
    pub fn distance_to(&self, p: &Point3) -> f64 {
        (0..self.faces.len())
            .map(|f| point_triangle_distance(p, &self.triangle(f)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Drops vertices not referenced by any face, keeping their order.
    pub fn compact(&mut self) {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut kept = Vec::new();
        for f in &mut self.faces {
            for i in f.iter_mut() {
                let slot = &mut remap[*i as usize];
                if *slot == u32::MAX {
                    *slot = kept.len() as u32;
                    kept.push(self.vertices[*i as usize]);
                }
                *i = *slot;
            }
        }
        self.vertices = kept;
    }
}

/// Distance from `p` to the closed triangle `t` (closest-point by Voronoi
/// region).
pub fn point_triangle_distance(p: &Point3, t: &[Point3; 3]) -> f64 {
    let [a, b, c] = *t;
    let (ab, ac, ap) = (b - a, c - a, p - a);
    let (d1, d2) = (ab.dot(&ap), ac.dot(&ap));
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm();
    }
    let bp = p - b;
    let (d3, d4) = (ab.dot(&bp), ac.dot(&bp));
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (p - (a + ab * v)).norm();
    }
    let cp = p - c;
    let (d5, d6) = (ab.dot(&cp), ac.dot(&cp));
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (p - (a + ac * w)).norm();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + (c - b) * w)).norm();
    }
    let denom = va + vb + vc;
    if denom == 0.0 {
        // degenerate triangle: fall back to its edges
        return [(a, b), (b, c), (c, a)]
            .iter()
            .map(|&(u, w)| {
                let e = w - u;
                let len2 = e.norm_squared();
                let s = if len2 > 0.0 { ((p - u).dot(&e) / len2).clamp(0.0, 1.0) } else { 0.0 };
                (p - (u + e * s)).norm()
            })
            .fold(f64::INFINITY, f64::min);
    }
    let (v, w) = (vb / denom, vc / denom);
    (p - (a + ab * v + ac * w)).norm()
}

/// Axis-aligned sampling grid with `resolution` cells per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: Point3,
    pub max: Point3,
    pub resolution: usize,
}

impl GridSpec {
    pub const MIN_RESOLUTION: usize = 8;

    pub fn new(min: Point3, max: Point3, resolution: usize) -> Result<Self> {
        let grid = GridSpec {
            min,
            max,
            resolution,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn cube(half_width: f64, resolution: usize) -> Result<Self> {
        Self::new(
            Point3::repeat(-half_width),
            Point3::repeat(half_width),
            resolution,
        )
    }

    /// Grid used for the canonical curved primitives.
    pub fn canonical() -> Self {
        Self::cube(1.2, 64).expect("valid grid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < Self::MIN_RESOLUTION {
            return Err(Error::InvalidParameter(format!(
                "grid resolution {} below {}",
                self.resolution,
                Self::MIN_RESOLUTION
            )));
        }
        if !(0..3).all(|k| self.min[k] < self.max[k]) {
            return Err(Error::InvalidParameter("grid min must be below max".into()));
        }
        Ok(())
    }

    pub fn cell_size(&self) -> Point3 {
        (self.max - self.min) / self.resolution as f64
    }

    pub fn cell_diagonal(&self) -> f64 {
        self.cell_size().norm()
    }
}

/// Cached unit-size mesh of a primitive family. Vertex tables for the cuboid
/// and the platonic solids, marching cubes on [`GridSpec::canonical`] for the
/// curved shapes.
pub fn canonical_mesh(kind: PrimitiveKind) -> &'static TriangleMesh {
    static CACHE: [OnceLock<TriangleMesh>; 9] = [const { OnceLock::new() }; 9];
    CACHE[kind.index()].get_or_init(|| build_canonical(kind))
}

fn build_canonical(kind: PrimitiveKind) -> TriangleMesh {
    let table = |p: &crate::geometry::Polyhedron| TriangleMesh {
        vertices: p.vertices.clone(),
        faces: p.faces.clone(),
    };
    match kind {
        PrimitiveKind::Cuboid => cuboid_mesh(1.0 / 3f64.sqrt()),
        PrimitiveKind::Tetrahedron => table(unit_tetrahedron()),
        PrimitiveKind::Octahedron => table(unit_octahedron()),
        PrimitiveKind::Icosahedron => table(unit_icosahedron()),
        PrimitiveKind::Dodecahedron => table(unit_dodecahedron()),
        PrimitiveKind::Sphere | PrimitiveKind::Cone | PrimitiveKind::Cylinder | PrimitiveKind::Torus => {
            marching_cubes(&SdfNode::Primitive(kind.canonical()), &GridSpec::canonical())
                .expect("canonical primitives cross the zero level")
        }
    }
}

fn cuboid_mesh(h: f64) -> TriangleMesh {
    let vertices = (0..8)
        .map(|i| {
            let s = |bit: u32| if i & (1 << bit) != 0 { h } else { -h };
            Point3::new(s(0), s(1), s(2))
        })
        .collect();
    // corner index bits: x = 1, y = 2, z = 4
    let quads: [[u32; 4]; 6] = [
        [0, 2, 3, 1], // -z
        [4, 5, 7, 6], // +z
        [0, 1, 5, 4], // -y
        [2, 6, 7, 3], // +y
        [0, 4, 6, 2], // -x
        [1, 3, 7, 5], // +x
    ];
    let faces = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    TriangleMesh { vertices, faces }
}

/// Mesh of the zero set of `F(T(x))` given the mesh of `F`: every vertex is
/// mapped through `T^-1`.
pub fn transform_mesh(mesh: &TriangleMesh, transform: &AffineTransform) -> Result<TriangleMesh> {
    let det = transform.determinant();
    if !(det.abs() >= 1e-12) {
        return Err(Error::SingularTransform { det });
    }
    let vertices = mesh
        .vertices
        .iter()
        .map(|v| transform.inverse_apply(v))
        .collect();
    let mut faces = mesh.faces.clone();
    if det < 0.0 {
        for f in &mut faces {
            f.swap(1, 2);
        }
    }
    Ok(TriangleMesh { vertices, faces })
}

/// Keeps the part of the mesh with `plane.sdf <= 0`, splitting crossing
/// triangles. The cut is left open.
pub fn clip_mesh(mesh: &TriangleMesh, plane: &Plane) -> Result<TriangleMesh> {
    let dist: Vec<f64> = mesh.vertices.iter().map(|v| plane.sdf(v)).collect();
    if dist.iter().all(|&d| d <= 0.0) {
        return Ok(mesh.clone());
    }
    if dist.iter().all(|&d| d > 0.0) {
        return Err(Error::EmptySurface);
    }

    let mut vertices = mesh.vertices.clone();
    let mut cut_points: HashMap<(u32, u32), u32> = HashMap::new();
    let mut faces = Vec::with_capacity(mesh.faces.len());
    let mut poly: Vec<u32> = Vec::with_capacity(4);

    for f in &mesh.faces {
        let inside = f.map(|i| dist[i as usize] <= 0.0);
        if inside.iter().all(|&b| b) {
            faces.push(*f);
            continue;
        }
        if !inside.iter().any(|&b| b) {
            continue;
        }
        poly.clear();
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            let (ina, inb) = (inside[k], inside[(k + 1) % 3]);
            if ina {
                poly.push(a);
            }
            if ina != inb {
                let key = (a.min(b), a.max(b));
                let idx = *cut_points.entry(key).or_insert_with(|| {
                    let (lo, hi) = key;
                    let (dl, dh) = (dist[lo as usize], dist[hi as usize]);
                    let (pl, ph) = (mesh.vertices[lo as usize], mesh.vertices[hi as usize]);
                    let mut p = pl + (ph - pl) * (dl / (dl - dh));
                    let d = plane.sdf(&p);
                    if d > 0.0 {
                        p -= plane.normal() * d;
                    }
                    vertices.push(p);
                    (vertices.len() - 1) as u32
                });
                poly.push(idx);
            }
        }
        for k in 1..poly.len().saturating_sub(1) {
            let tri = [poly[0], poly[k], poly[k + 1]];
            if tri[0] != tri[1] && tri[1] != tri[2] && tri[0] != tri[2] {
                faces.push(tri);
            }
        }
    }
    let mut out = TriangleMesh { vertices, faces };
    out.compact();
    if out.is_empty() {
        return Err(Error::EmptySurface);
    }
    Ok(out)
}

/// Concatenates meshes, offsetting face indices. No welding, no boolean union.
pub fn merge_meshes<'a>(meshes: impl IntoIterator<Item = &'a TriangleMesh>) -> Result<TriangleMesh> {
    let mut out = TriangleMesh::default();
    let mut any = false;
    for m in meshes {
        any = true;
        let offset = out.vertices.len() as u32;
        out.vertices.extend_from_slice(&m.vertices);
        out.faces
            .extend(m.faces.iter().map(|f| f.map(|i| i + offset)));
    }
    if !any {
        return Err(Error::InvalidParameter("merging an empty list of meshes".into()));
    }
    Ok(out)
}

/// Similarity mapping a mesh to the unit frame: `x' = (x - center) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub center: Point3,
    pub scale: f64,
}

impl Normalization {
    /// Bounding-box centre to the origin, largest vertex norm to 1.
    pub fn of(mesh: &TriangleMesh) -> Result<Self> {
        let (lo, hi) = mesh
            .bounding_box()
            .ok_or_else(|| Error::DegenerateMesh("mesh has no vertices".into()))?;
        let center = (lo + hi) / 2.0;
        let scale = mesh
            .vertices
            .iter()
            .map(|v| (v - center).norm())
            .fold(0.0, f64::max);
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::DegenerateMesh("all vertices coincide".into()));
        }
        Ok(Normalization { center, scale })
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        (p - self.center) / self.scale
    }

    /// The query transform under which an implicit shape follows this
    /// normalization: `T(x) = scale * x + center`.
    pub fn as_transform(&self) -> AffineTransform {
        AffineTransform::new(crate::geometry::transform_params(self.scale, -self.center))
            .expect("positive finite scale")
    }
}

pub fn normalize_mesh(mesh: &TriangleMesh) -> Result<TriangleMesh> {
    Ok(normalize_mesh_with(mesh)?.0)
}

pub fn normalize_mesh_with(mesh: &TriangleMesh) -> Result<(TriangleMesh, Normalization)> {
    let norm = Normalization::of(mesh)?;
    let mut vertices: Vec<Point3> = mesh.vertices.iter().map(|v| norm.apply(v)).collect();
    // exact unit max norm despite rounding in the division
    let max = vertices.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if max != 1.0 {
        for v in &mut vertices {
            *v /= max;
        }
    }
    Ok((
        TriangleMesh {
            vertices,
            faces: mesh.faces.clone(),
        },
        norm,
    ))
}
