use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetEntry, ObjectSpec};
use crate::error::{Error, Result};
use crate::meshing::io::{read_mesh, write_mesh, MeshFormat};
use crate::policy::Policy;
use crate::sampling::io::{read_cloud, write_cloud, CloudFormat};

pub const MANIFEST_FILE: &str = "manifest.json";
const MANIFEST_VERSION: u32 = 1;

/// On-disk description of an exported dataset. Fields are declared in
/// lexicographic order so the serialized form is canonical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    pub name: String,
    pub points_per_cloud: usize,
    pub policy: Option<Policy>,
    pub seed: u64,
    pub version: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub cloud: String,
    pub mesh: String,
    pub spec: Option<ObjectSpec>,
}

/// Writes `obj_%05d.<mesh ext>` and `cloud_%05d.<cloud ext>` per entry and
/// a `manifest.json`; returns the manifest path.
pub fn export_dataset(
    dataset: &Dataset,
    dir: &Path,
    mesh_format: MeshFormat,
    cloud_format: CloudFormat,
) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(dataset.entries.len());
    for (i, e) in dataset.entries.iter().enumerate() {
        let mesh = format!("obj_{i:05}.{}", mesh_format.extension());
        let cloud = format!("cloud_{i:05}.{}", cloud_format.extension());
        write_mesh(&e.mesh, &dir.join(&mesh))?;
        write_cloud(&e.cloud, &dir.join(&cloud))?;
        entries.push(ManifestEntry {
            cloud,
            mesh,
            spec: e.spec.clone(),
        });
    }
    let manifest = Manifest {
        entries,
        name: dataset.name.clone(),
        points_per_cloud: dataset.points_per_cloud,
        policy: dataset.policy,
        seed: dataset.seed,
        version: MANIFEST_VERSION,
    };
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Reads a dataset written by [`export_dataset`]. `path` may be the
/// manifest itself or its directory.
pub fn import_dataset(path: &Path) -> Result<Dataset> {
    let manifest_path = if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    };
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::format(&manifest_path, e.to_string()))?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::format(
            &manifest_path,
            format!("unsupported manifest version {}", manifest.version),
        ));
    }
    let entries = manifest
        .entries
        .into_iter()
        .map(|m| {
            let cloud_path = dir.join(&m.cloud);
            let cloud = read_cloud(&cloud_path)?;
            if cloud.len() != manifest.points_per_cloud {
                return Err(Error::format(
                    &cloud_path,
                    format!("expected {} points, found {}", manifest.points_per_cloud, cloud.len()),
                ));
            }
            Ok(DatasetEntry {
                mesh: read_mesh(&dir.join(&m.mesh))?,
                cloud,
                spec: m.spec,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        name: manifest.name,
        seed: manifest.seed,
        policy: manifest.policy,
        points_per_cloud: manifest.points_per_cloud,
        entries,
    })
}
