use std::collections::HashMap;

use super::mc_table::TRI_TABLE;
use super::{GridSpec, TriangleMesh};
use crate::error::{Error, Result};
use crate::geometry::{Point3, SdfNode};

/// Cube corner offsets in table order.
const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

const EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

/// Extracts the zero level set of `node` over `grid`.
///
/// A node is inside when its value is negative. Grid nodes lying exactly on
/// the surface produce coincident edge vertices; those are welded and the
/// resulting zero-area triangles dropped. The result is closed whenever the
/// field is positive on the grid boundary.
pub fn marching_cubes(node: &SdfNode, grid: &GridSpec) -> Result<TriangleMesh> {
    grid.validate()?;
    let n = grid.resolution + 1;
    let step = grid.cell_size();
    let position = |i: usize, j: usize, k: usize| {
        grid.min + Point3::new(i as f64 * step.x, j as f64 * step.y, k as f64 * step.z)
    };
    let idx = |i: usize, j: usize, k: usize| (k * n + j) * n + i;

    let mut values = vec![0.0; n * n * n];
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                values[idx(i, j, k)] = node.eval(&position(i, j, k));
            }
        }
    }
    let inside = |v: f64| v < 0.0;
    if values.iter().all(|&v| inside(v)) || !values.iter().any(|&v| inside(v)) {
        return Err(Error::EmptySurface);
    }

    let mut vertices = Vec::new();
    let mut welded: HashMap<[u64; 3], u32> = HashMap::new();
    // edge-vertex cache keyed by (grid node, axis)
    let mut edge_vertex: HashMap<(usize, usize), u32> = HashMap::new();
    let mut faces = Vec::new();

    for k in 0..grid.resolution {
        for j in 0..grid.resolution {
            for i in 0..grid.resolution {
                let corner = |c: usize| {
                    let [di, dj, dk] = CORNERS[c];
                    (i + di, j + dj, k + dk)
                };
                let mut case = 0usize;
                for c in 0..8 {
                    let (a, b, d) = corner(c);
                    if inside(values[idx(a, b, d)]) {
                        case |= 1 << c;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }
                let mut local = [u32::MAX; 12];
                let row = &TRI_TABLE[case];
                for t in row.chunks(3).take_while(|t| t[0] >= 0) {
                    let mut tri = [0u32; 3];
                    for (slot, &e) in tri.iter_mut().zip(t) {
                        let e = e as usize;
                        if local[e] == u32::MAX {
                            let (a, b) = (corner(EDGES[e][0]), corner(EDGES[e][1]));
                            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                            let axis = if lo.0 != hi.0 {
                                0
                            } else if lo.1 != hi.1 {
                                1
                            } else {
                                2
                            };
                            let key = (idx(lo.0, lo.1, lo.2), axis);
                            local[e] = *edge_vertex.entry(key).or_insert_with(|| {
                                let (va, vb) = (values[key.0], values[idx(hi.0, hi.1, hi.2)]);
                                let (pa, pb) = (position(lo.0, lo.1, lo.2), position(hi.0, hi.1, hi.2));
                                let p = if va == 0.0 {
                                    pa
                                } else if vb == 0.0 {
                                    pb
                                } else {
                                    pa + (pb - pa) * (va / (va - vb))
                                };
                                let bits = [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
                                *welded.entry(bits).or_insert_with(|| {
                                    vertices.push(p);
                                    (vertices.len() - 1) as u32
                                })
                            });
                        }
                        *slot = local[e];
                    }
                    if tri[0] != tri[1] && tri[1] != tri[2] && tri[0] != tri[2] {
                        // the table winds clockwise seen from outside
                        faces.push([tri[0], tri[2], tri[1]]);
                    }
                }
            }
        }
    }
    if faces.is_empty() {
        return Err(Error::EmptySurface);
    }
    let mut mesh = TriangleMesh { vertices, faces };
    mesh.compact();
    Ok(mesh)
}
