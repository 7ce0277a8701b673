//! Vertex and face tables for the platonic solids, circumradius 1.

use std::sync::OnceLock;

use super::Point3;

/// Convex polyhedron with outward-oriented triangular faces.
#[derive(Debug)]
pub struct Polyhedron {
    pub vertices: Vec<Point3>,
    pub faces: Vec<[u32; 3]>,
    /// Distinct face planes as (unit outward normal, offset): inside iff `n·p < d`.
    pub planes: Vec<(Point3, f64)>,
}

impl Polyhedron {
    /// Largest signed distance to any face plane, scaled to `circumradius`.
    pub fn plane_distance(&self, p: &Point3, circumradius: f64) -> f64 {
        self.planes
            .iter()
            .map(|(n, d)| n.dot(p) - d * circumradius)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn unit(points: Vec<[f64; 3]>) -> Vec<Point3> {
    points
        .into_iter()
        .map(|p| Point3::new(p[0], p[1], p[2]).normalize())
        .collect()
}

/// Every vertex triple whose pairwise distances equal the minimum edge
/// length, oriented outward. Valid for solids with triangular faces.
fn triangular_faces(vertices: &[Point3]) -> Vec<[u32; 3]> {
    let n = vertices.len();
    let mut edge = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            edge = edge.min((vertices[i] - vertices[j]).norm());
        }
    }
    let is_edge = |i: usize, j: usize| ((vertices[i] - vertices[j]).norm() - edge).abs() < 1e-9;
    let mut faces = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if !is_edge(i, j) {
                continue;
            }
            for k in j + 1..n {
                if is_edge(i, k) && is_edge(j, k) {
                    faces.push(orient(vertices, [i as u32, j as u32, k as u32]));
                }
            }
        }
    }
    faces
}

fn orient(vertices: &[Point3], f: [u32; 3]) -> [u32; 3] {
    let [a, b, c] = f.map(|i| vertices[i as usize]);
    if (b - a).cross(&(c - a)).dot(&(a + b + c)) < 0.0 {
        [f[0], f[2], f[1]]
    } else {
        f
    }
}

fn planes_of(vertices: &[Point3], faces: &[[u32; 3]]) -> Vec<(Point3, f64)> {
    let mut planes: Vec<(Point3, f64)> = Vec::new();
    for f in faces {
        let [a, b, c] = f.map(|i| vertices[i as usize]);
        let n = (b - a).cross(&(c - a)).normalize();
        if planes.iter().all(|(m, _)| (m - n).norm() > 1e-9) {
            planes.push((n, n.dot(&a)));
        }
    }
    planes
}

fn build(vertices: Vec<Point3>, faces: Vec<[u32; 3]>) -> Polyhedron {
    let planes = planes_of(&vertices, &faces);
    Polyhedron {
        vertices,
        faces,
        planes,
    }
}

fn tetrahedron() -> Polyhedron {
    let v = unit(vec![
        [1.0, 1.0, 1.0],
        [1.0, -1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
    ]);
    let f = triangular_faces(&v);
    build(v, f)
}

fn octahedron() -> Polyhedron {
    let v = unit(vec![
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ]);
    let f = triangular_faces(&v);
    build(v, f)
}

fn icosahedron() -> Polyhedron {
    let g = (1.0 + 5f64.sqrt()) / 2.0;
    let mut raw = Vec::new();
    for s1 in [-1.0, 1.0] {
        for s2 in [-1.0, 1.0] {
            raw.push([0.0, s1, s2 * g]);
            raw.push([s1, s2 * g, 0.0]);
            raw.push([s2 * g, 0.0, s1]);
        }
    }
    let v = unit(raw);
    let f = triangular_faces(&v);
    build(v, f)
}

/// The dual of the icosahedron: one vertex per icosahedron face, one
/// pentagon (fanned into three triangles) per icosahedron vertex.
fn dodecahedron() -> Polyhedron {
    let ico = icosahedron();
    let vertices: Vec<Point3> = ico
        .faces
        .iter()
        .map(|f| f.iter().map(|&i| ico.vertices[i as usize]).sum::<Point3>().normalize())
        .collect();
    let mut faces = Vec::new();
    for (vi, axis) in ico.vertices.iter().enumerate() {
        let mut ring: Vec<u32> = ico
            .faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.contains(&(vi as u32)))
            .map(|(fi, _)| fi as u32)
            .collect();
        let u = axis.cross(&if axis.x.abs() < 0.9 { Point3::x() } else { Point3::y() }).normalize();
        let w = axis.cross(&u);
        ring.sort_by(|&a, &b| {
            let angle = |i: u32| {
                let p = vertices[i as usize];
                p.dot(&w).atan2(p.dot(&u))
            };
            angle(a).total_cmp(&angle(b))
        });
        for k in 1..ring.len() - 1 {
            faces.push(orient(&vertices, [ring[0], ring[k], ring[k + 1]]));
        }
    }
    build(vertices, faces)
}

macro_rules! cached {
    ($name:ident, $builder:ident) => {
        pub fn $name() -> &'static Polyhedron {
            static CELL: OnceLock<Polyhedron> = OnceLock::new();
            CELL.get_or_init($builder)
        }
    };
}

cached!(unit_tetrahedron, tetrahedron);
cached!(unit_octahedron, octahedron);
cached!(unit_icosahedron, icosahedron);
cached!(unit_dodecahedron, dodecahedron);
