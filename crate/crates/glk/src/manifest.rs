//! Dataset manifests: a JSON index of label-map files.
//!
//! A manifest is `{"images": [{"label": "plant_007.pgm", "plant_id": "plant_007"}, ...]}`.
//! Label paths are resolved relative to the directory containing the manifest
//! file, so a dataset directory can be moved as a unit.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::LabelMap;
use crate::pgm;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Label-map file, relative to the manifest's directory (or absolute).
    pub label: PathBuf,
    pub plant_id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Manifest {
    pub images: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Resolves each entry's label path against the manifest's directory.
    pub fn resolved_labels(&self, manifest_path: &Path) -> Vec<PathBuf> {
        let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
        self.images
            .iter()
            .map(|e| {
                if e.label.is_absolute() {
                    e.label.clone()
                } else {
                    base.join(&e.label)
                }
            })
            .collect()
    }
}

/// One loaded image: its identity plus the parsed label map.
#[derive(Debug, Clone)]
pub struct DatasetImage {
    pub plant_id: String,
    pub map: LabelMap,
}

/// Reads a manifest and every label map it references.
pub fn load_dataset(manifest_path: &Path) -> Result<Vec<DatasetImage>> {
    let manifest = Manifest::read(manifest_path)?;
    let labels = manifest.resolved_labels(manifest_path);
    manifest
        .images
        .iter()
        .zip(labels)
        .map(|(entry, label_path)| {
            Ok(DatasetImage {
                plant_id: entry.plant_id.clone(),
                map: pgm::read_labelmap(&label_path)?,
            })
        })
        .collect()
}
