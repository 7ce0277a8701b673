//! Point-cloud files: binary little-endian PLY and plain-text XYZ.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::meshing::io::{read_ply_elements, write_ply_elements};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Ply,
    Xyz,
}

impl CloudFormat {
    pub fn extension(self) -> &'static str {
        match self {
            CloudFormat::Ply => "ply",
            CloudFormat::Xyz => "xyz",
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("ply") => Ok(CloudFormat::Ply),
            Some("xyz") => Ok(CloudFormat::Xyz),
            _ => Err(Error::format(path, "unknown cloud extension (expected .ply or .xyz)")),
        }
    }
}

pub fn write_cloud(cloud: &PointCloud, path: &Path) -> Result<()> {
    match CloudFormat::from_path(path)? {
        CloudFormat::Ply => write_ply_elements(path, &cloud.points, None),
        CloudFormat::Xyz => write_xyz(cloud, path),
    }
}

pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    let points = match CloudFormat::from_path(path)? {
        CloudFormat::Ply => read_ply_elements(path)?.0,
        CloudFormat::Xyz => read_xyz(path)?,
    };
    PointCloud::new(points).map_err(|e| Error::format(path, e.to_string()))
}

fn write_xyz(cloud: &PointCloud, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        for p in &cloud.points {
            writeln!(out, "{} {} {}", p.x, p.y, p.z)?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

fn read_xyz(path: &Path) -> Result<Vec<Point3>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut points = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let coords: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::format(path, format!("line {}: bad coordinate", lineno + 1)))?;
        if coords.len() != 3 {
            return Err(Error::format(path, format!("line {}: expected x y z", lineno + 1)));
        }
        points.push(Point3::new(coords[0], coords[1], coords[2]));
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn both_formats_round_trip_bit_exactly() {
        let mesh = crate::meshing::canonical_mesh(crate::geometry::PrimitiveKind::Cylinder);
        let cloud = super::super::sample_surface(mesh, 300, &mut seed::rng(1)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for name in ["c.ply", "c.xyz"] {
            let path = dir.path().join(name);
            write_cloud(&cloud, &path).unwrap();
            let back = read_cloud(&path).unwrap();
            assert_eq!(back, cloud, "{name}");
        }
        assert!(write_cloud(&cloud, &dir.path().join("c.txt")).is_err());
    }
}
