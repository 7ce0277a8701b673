//! OBJ (ASCII) and binary little-endian PLY mesh files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ply_rs::parser::Parser;
use ply_rs::ply::{DefaultElement, Property, PropertyAccess};

use super::TriangleMesh;
use crate::error::{Error, Result};
use crate::geometry::Point3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn extension(self) -> &'static str {
        match self {
            MeshFormat::Obj => "obj",
            MeshFormat::Ply => "ply",
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("obj") => Ok(MeshFormat::Obj),
            Some("ply") => Ok(MeshFormat::Ply),
            _ => Err(Error::format(path, "unknown mesh extension (expected .obj or .ply)")),
        }
    }
}

pub fn write_mesh(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    match MeshFormat::from_path(path)? {
        MeshFormat::Obj => write_obj(mesh, path),
        MeshFormat::Ply => write_ply(mesh, path),
    }
}

pub fn read_mesh(path: &Path) -> Result<TriangleMesh> {
    match MeshFormat::from_path(path)? {
        MeshFormat::Obj => read_obj(path),
        MeshFormat::Ply => read_ply(path),
    }
}

pub fn write_obj(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        for v in &mesh.vertices {
            writeln!(out, "v {} {} {}", v.x, v.y, v.z)?;
        }
        for f in &mesh.faces {
            writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Reads `v` and `f` records; polygons are fanned into triangles, texture
/// and normal references (`f 1/2/3`) and negative indices are accepted.
pub fn read_obj(path: &Path) -> Result<TriangleMesh> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut mesh = TriangleMesh::default();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let bad = |msg: &str| Error::format(path, format!("line {}: {msg}", lineno + 1));
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let coords: Vec<f64> = parts
                    .take(3)
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad("bad vertex coordinate"))?;
                if coords.len() != 3 {
                    return Err(bad("vertex needs three coordinates"));
                }
                mesh.vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let n = mesh.vertices.len() as i64;
                let mut poly = Vec::new();
                for tok in parts {
                    let first = tok.split('/').next().unwrap_or("");
                    let raw: i64 = first.parse().map_err(|_| bad("bad face index"))?;
                    let index = if raw < 0 { n + raw } else { raw - 1 };
                    if index < 0 || index >= n {
                        return Err(bad("face index out of range"));
                    }
                    poly.push(index as u32);
                }
                if poly.len() < 3 {
                    return Err(bad("face needs at least three vertices"));
                }
                for k in 1..poly.len() - 1 {
                    mesh.faces.push([poly[0], poly[k], poly[k + 1]]);
                }
            }
            _ => {}
        }
    }
    mesh.validate().map_err(|e| Error::format(path, e.to_string()))?;
    Ok(mesh)
}

#[derive(Default)]
pub(crate) struct PlyVertex([f64; 3]);

impl PropertyAccess for PlyVertex {
    fn new() -> Self {
        Self::default()
    }

    fn set_property(&mut self, name: String, property: Property) {
        let slot = match name.as_str() {
            "x" => 0,
            "y" => 1,
            "z" => 2,
            _ => return,
        };
        self.0[slot] = match property {
            Property::Float(v) => f64::from(v),
            Property::Double(v) => v,
            Property::Char(v) => f64::from(v),
            Property::UChar(v) => f64::from(v),
            Property::Short(v) => f64::from(v),
            Property::UShort(v) => f64::from(v),
            Property::Int(v) => f64::from(v),
            Property::UInt(v) => f64::from(v),
            _ => f64::NAN,
        };
    }

}

#[derive(Default)]
struct PlyFace(Vec<i32>);

impl PropertyAccess for PlyFace {
    fn new() -> Self {
        Self::default()
    }

    fn set_property(&mut self, name: String, property: Property) {
        if name != "vertex_indices" && name != "vertex_index" {
            return;
        }
        self.0 = match property {
            Property::ListInt(v) => v,
            Property::ListUInt(v) => v.into_iter().map(|i| i as i32).collect(),
            Property::ListShort(v) => v.into_iter().map(i32::from).collect(),
            Property::ListUShort(v) => v.into_iter().map(i32::from).collect(),
            Property::ListChar(v) => v.into_iter().map(i32::from).collect(),
            Property::ListUChar(v) => v.into_iter().map(i32::from).collect(),
            _ => Vec::new(),
        };
    }
}

fn ply_error(path: &Path, e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::InvalidInput || e.kind() == std::io::ErrorKind::InvalidData {
        Error::format(path, e.to_string())
    } else {
        Error::io(path, e)
    }
}

/// Writes binary little-endian PLY with a `double x, y, z` vertex element
/// and, when given, a `uchar`/`int` `vertex_indices` face list.
pub(crate) fn write_ply_elements(
    path: &Path,
    points: &[Point3],
    faces: Option<&[[u32; 3]]>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        write!(
            out,
            "ply\nformat binary_little_endian 1.0\nelement vertex {}\n\
             property double x\nproperty double y\nproperty double z\n",
            points.len()
        )?;
        if let Some(faces) = faces {
            write!(
                out,
                "element face {}\nproperty list uchar int vertex_indices\n",
                faces.len()
            )?;
        }
        out.write_all(b"end_header\n")?;
        for p in points {
            for c in [p.x, p.y, p.z] {
                out.write_all(&c.to_le_bytes())?;
            }
        }
        for f in faces.unwrap_or(&[]) {
            out.write_all(&[3u8])?;
            for &i in f {
                out.write_all(&(i as i32).to_le_bytes())?;
            }
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Reads the `vertex` element and, when present, the `face` element of any
/// PLY file (ASCII or binary, any numeric coordinate type).
pub(crate) fn read_ply_elements(path: &Path) -> Result<(Vec<Point3>, Vec<Vec<i32>>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let vertex_parser = Parser::<PlyVertex>::new();
    let face_parser = Parser::<PlyFace>::new();
    let other_parser = Parser::<DefaultElement>::new();
    let header = vertex_parser
        .read_header(&mut reader)
        .map_err(|e| ply_error(path, e))?;
    let mut points = Vec::new();
    let mut faces = Vec::new();
    for (_, element) in &header.elements {
        match element.name.as_str() {
            "vertex" => {
                points = vertex_parser
                    .read_payload_for_element(&mut reader, element, &header)
                    .map_err(|e| ply_error(path, e))?
                    .into_iter()
                    .map(|v| Point3::from(v.0))
                    .collect();
            }
            "face" => {
                faces = face_parser
                    .read_payload_for_element(&mut reader, element, &header)
                    .map_err(|e| ply_error(path, e))?
                    .into_iter()
                    .map(|f| f.0)
                    .collect();
            }
            _ => {
                other_parser
                    .read_payload_for_element(&mut reader, element, &header)
                    .map_err(|e| ply_error(path, e))?;
            }
        }
    }
    Ok((points, faces))
}

pub fn write_ply(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    write_ply_elements(path, &mesh.vertices, Some(&mesh.faces))
}

pub fn read_ply(path: &Path) -> Result<TriangleMesh> {
    let (vertices, polys) = read_ply_elements(path)?;
    let n = vertices.len();
    let mut faces = Vec::new();
    for (i, poly) in polys.iter().enumerate() {
        if poly.len() < 3 || poly.iter().any(|&k| k < 0 || k as usize >= n) {
            return Err(Error::format(path, format!("face {i} is malformed: {poly:?}")));
        }
        for k in 1..poly.len() - 1 {
            faces.push([poly[0] as u32, poly[k] as u32, poly[k + 1] as u32]);
        }
    }
    let mesh = TriangleMesh { vertices, faces };
    mesh.validate().map_err(|e| Error::format(path, e.to_string()))?;
    Ok(mesh)
}
