//! Packaged patch datasets: one directory per building holding `rgb.npy`
//! and `lidar.npy`, indexed by a sorted JSON-lines manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::Array3;
use ndarray_npy::{read_npy, write_npy};
use roofsense_core::{BuildingSample, Country, PixelGrid, Split, Task};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub const MANIFEST: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub building_id: String,
    pub roof_type: Option<String>,
    pub roof_material: Option<String>,
    pub country: Country,
    pub split: Split,
    pub rgb: String,
    pub lidar: String,
    pub rgb_shape: [usize; 3],
    pub lidar_shape: [usize; 3],
    /// Source rasters and extraction parameters.
    pub provenance: Value,
}

impl ManifestEntry {
    pub fn labels(&self) -> Result<(Option<u8>, Option<u8>)> {
        let lookup = |task: Task, name: &Option<String>| -> Result<Option<u8>> {
            name.as_deref()
                .map(|n| {
                    task.schema()
                        .index_of(n)
                        .map(|i| i as u8)
                        .ok_or_else(|| Error::Invalid(format!("{}: unknown {} class {n:?}", self.building_id, task.as_str())))
                })
                .transpose()
        };
        Ok((lookup(Task::RoofType, &self.roof_type)?, lookup(Task::RoofMaterial, &self.roof_material)?))
    }

    pub fn label(&self, task: Task) -> Result<Option<usize>> {
        let (t, m) = self.labels()?;
        Ok(task.label_of(t, m))
    }
}

/// File-system safe directory name for a building id.
pub fn sample_dir_name(id: &str) -> String {
    let clean: String =
        id.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect();
    if clean == id && !clean.starts_with('.') {
        clean
    } else {
        let digest = Sha256::digest(id.as_bytes());
        format!("{clean}-{}", &hex::encode(digest)[..8])
    }
}

fn to_array(grid: &PixelGrid) -> Array3<f32> {
    Array3::from_shape_vec((grid.channels(), grid.height(), grid.width()), grid.data().to_vec())
        .expect("pixel grid shape")
}

fn from_array(path: &Path) -> Result<PixelGrid> {
    let a: Array3<f32> = read_npy(path).map_err(|e| Error::format(path, e))?;
    let (c, h, w) = a.dim();
    let data = if a.is_standard_layout() { a.into_raw_vec_and_offset().0 } else { a.iter().copied().collect() };
    Ok(PixelGrid::new(c, h, w, data)?)
}

/// Writes samples and a manifest sorted by building id. Existing sample
/// files are overwritten.
pub fn write_dataset(root: &Path, samples: &[BuildingSample], provenance: &Value) -> Result<Vec<ManifestEntry>> {
    let sample_root = root.join("samples");
    fs::create_dir_all(&sample_root).map_err(|e| Error::io(&sample_root, e))?;
    let mut entries = Vec::with_capacity(samples.len());
    for s in samples {
        let rel = format!("samples/{}", sample_dir_name(&s.building_id));
        let dir = root.join(&rel);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for (name, grid) in [("rgb.npy", &s.rgb), ("lidar.npy", &s.lidar)] {
            let p = dir.join(name);
            write_npy(&p, &to_array(grid)).map_err(|e| Error::format(&p, e))?;
        }
        let name = |task: Task, l: Option<u8>| l.and_then(|i| task.schema().name(i as usize)).map(str::to_string);
        entries.push(ManifestEntry {
            building_id: s.building_id.clone(),
            roof_type: name(Task::RoofType, s.roof_type),
            roof_material: name(Task::RoofMaterial, s.roof_material),
            country: s.country,
            split: s.split,
            rgb: format!("{rel}/rgb.npy"),
            lidar: format!("{rel}/lidar.npy"),
            rgb_shape: [s.rgb.channels(), s.rgb.height(), s.rgb.width()],
            lidar_shape: [s.lidar.channels(), s.lidar.height(), s.lidar.width()],
            provenance: provenance.clone(),
        });
    }
    write_manifest(root, &mut entries)?;
    Ok(entries)
}

pub fn write_manifest(root: &Path, entries: &mut [ManifestEntry]) -> Result<()> {
    entries.sort_by(|a, b| a.building_id.cmp(&b.building_id));
    let mut text = String::new();
    for e in entries.iter() {
        text.push_str(&serde_json::to_string(e)?);
        text.push('\n');
    }
    let p = root.join(MANIFEST);
    fs::write(&p, text).map_err(|e| Error::io(&p, e))
}

pub fn read_manifest(root: &Path) -> Result<Vec<ManifestEntry>> {
    let p = root.join(MANIFEST);
    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::format(&p, format!("line {}: {e}", i + 1))))
        .collect()
}

/// Hex SHA-256 of the manifest bytes.
pub fn manifest_hash(root: &Path) -> Result<String> {
    let p = root.join(MANIFEST);
    let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn load_sample(root: &Path, entry: &ManifestEntry) -> Result<BuildingSample> {
    let (roof_type, roof_material) = entry.labels()?;
    Ok(BuildingSample {
        building_id: entry.building_id.clone(),
        rgb: from_array(&root.join(&entry.rgb))?,
        lidar: from_array(&root.join(&entry.lidar))?,
        roof_type,
        roof_material,
        country: entry.country,
        split: entry.split,
    })
}

/// Loads every sample whose split is in `splits`, in manifest order.
pub fn load_split(root: &Path, splits: &[Split]) -> Result<Vec<BuildingSample>> {
    read_manifest(root)?
        .iter()
        .filter(|e| splits.contains(&e.split))
        .map(|e| load_sample(root, e))
        .collect()
}

/// Rewrites the split column of the manifest.
pub fn update_splits(root: &Path, splits: &BTreeMap<String, Split>) -> Result<()> {
    let mut entries = read_manifest(root)?;
    for e in &mut entries {
        e.split = splits.get(&e.building_id).copied().unwrap_or(Split::Unassigned);
    }
    write_manifest(root, &mut entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(id: &str) -> BuildingSample {
        BuildingSample {
            building_id: id.into(),
            rgb: PixelGrid::from_fn(3, 2, 3, |c, y, x| (c * 100 + y * 10 + x) as f32),
            lidar: PixelGrid::filled(1, 2, 3, 2.5),
            roof_type: Some(2),
            roof_material: None,
            country: Country::SaintLucia,
            split: Split::Unassigned,
        }
    }

    #[test]
    fn round_trip_sorted_by_id() {
        let dir = tempfile::tempdir().unwrap();
        let samples = vec![sample("b/2"), sample("a1")];
        write_dataset(dir.path(), &samples, &serde_json::json!({"generator": "test"})).unwrap();
        let entries = read_manifest(dir.path()).unwrap();
        assert_eq!(entries[0].building_id, "a1");
        assert_eq!(entries[1].roof_type.as_deref(), Some("Flat"));
        let back = load_sample(dir.path(), &entries[1]).unwrap();
        assert_eq!(back, samples[0]);
    }

    #[test]
    fn splits_update_in_place() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &[sample("x"), sample("y")], &Value::Null).unwrap();
        let before = manifest_hash(dir.path()).unwrap();
        let map = BTreeMap::from([("x".to_string(), Split::Test), ("y".to_string(), Split::Train)]);
        update_splits(dir.path(), &map).unwrap();
        assert_ne!(manifest_hash(dir.path()).unwrap(), before);
        assert_eq!(load_split(dir.path(), &[Split::Test]).unwrap()[0].building_id, "x");
    }

    #[test]
    fn unsafe_ids_get_distinct_dirs() {
        assert_eq!(sample_dir_name("abc-1"), "abc-1");
        assert_ne!(sample_dir_name("a/b"), sample_dir_name("a_b"));
        assert!(!sample_dir_name("..").contains('/'));
    }
}
