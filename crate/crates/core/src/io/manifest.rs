//! JSON dataset manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{
    AnnotatedInterval, Dataset, FeatureGroup, Interval, NarrationConstraints, Split, TaskDefinition, VideoInstance,
};
use crate::error::{Error, Result};
use crate::io::features::{read_features, write_features};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: u32,
    pub tasks: Vec<TaskDefinition>,
    pub videos: Vec<VideoRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoRecord {
    pub id: String,
    pub task: String,
    pub timesteps: usize,
    /// Relative to the manifest's directory unless absolute.
    pub features: PathBuf,
    pub groups: Vec<FeatureGroup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<Vec<AnnotatedInterval>>,
    /// Step index to allowed `[start, end)` intervals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<BTreeMap<usize, Vec<[usize; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::Version {
            path: path.display().to_string(),
            found: manifest.version,
            expected: MANIFEST_VERSION,
        });
    }
    Ok(manifest)
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Reads the manifest and every feature file, then validates the dataset.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let ds = load_unvalidated(path)?;
    ds.validate().into_result()?;
    Ok(ds)
}

/// As [`load_dataset`] without the final invariant check.
pub fn load_unvalidated(path: &Path) -> Result<Dataset> {
    let manifest = read_manifest(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut videos = Vec::with_capacity(manifest.videos.len());
    for rec in manifest.videos {
        let fpath = resolve(base, &rec.features);
        if !fpath.exists() {
            return Err(Error::Validation(format!(
                "video {}: feature file {} not found",
                rec.id,
                fpath.display()
            )));
        }
        let (features, header) = read_features(&fpath)?;
        if header.rows != rec.timesteps {
            return Err(Error::Validation(format!(
                "video {}: manifest declares {} timesteps, {} has {} rows",
                rec.id,
                rec.timesteps,
                fpath.display(),
                header.rows
            )));
        }
        if header.groups != rec.groups {
            return Err(Error::Validation(format!(
                "video {}: feature groups in manifest and {} differ",
                rec.id,
                fpath.display()
            )));
        }
        let narration = rec.constraints.map(|m| -> NarrationConstraints {
            m.into_iter()
                .map(|(step, ivs)| (step, ivs.into_iter().map(|[s, e]| Interval::new(s, e)).collect()))
                .collect()
        });
        videos.push(VideoInstance {
            id: rec.id,
            task_id: rec.task,
            features,
            groups: rec.groups,
            reference: rec.annotations,
            narration,
            split: rec.split,
        });
    }
    Ok(Dataset::new(manifest.tasks, videos))
}

/// Writes `manifest.json` and one feature file per video into `dir`.
pub fn save_dataset(ds: &Dataset, dir: &Path) -> Result<PathBuf> {
    let feature_dir = dir.join("features");
    fs::create_dir_all(&feature_dir).map_err(|e| Error::io(&feature_dir, e))?;
    let mut records = Vec::with_capacity(ds.videos.len());
    for (i, v) in ds.videos.iter().enumerate() {
        let rel = PathBuf::from("features").join(format!("{i:05}.f32"));
        write_features(&dir.join(&rel), &v.features, &v.groups)?;
        records.push(VideoRecord {
            id: v.id.clone(),
            task: v.task_id.clone(),
            timesteps: v.len(),
            features: rel,
            groups: v.groups.clone(),
            annotations: v.reference.clone(),
            constraints: v.narration.as_ref().map(|m| {
                m.iter()
                    .map(|(&step, ivs)| (step, ivs.iter().map(|iv| [iv.start, iv.end]).collect()))
                    .collect()
            }),
            split: v.split,
        });
    }
    let manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        tasks: ds.tasks.clone(),
        videos: records,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
