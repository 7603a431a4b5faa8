use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{load_samples, SamplingConfig, ShapeSamples, ShapeSource};
use crate::error::{Result, SdfError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeEntry {
    pub id: String,
    /// Sample file, relative to the manifest's directory.
    pub file: PathBuf,
    pub count: usize,
    pub seed: u64,
    pub split: Split,
    pub source: ShapeSource,
}

/// Index of a generated dataset, stored as TOML next to the sample files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    /// Free-form provenance label (the CLI stores the config hash and seed).
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub tag: String,
    pub sampling: SamplingConfig,
    #[serde(default, rename = "shape")]
    pub shapes: Vec<ShapeEntry>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.shapes {
            if !seen.insert(e.id.as_str()) {
                return Err(SdfError::invalid(format!("duplicate shape id `{}`", e.id)));
            }
        }
        Ok(())
    }

    /// Parses and validates; every referenced sample file must exist.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| SdfError::File {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        let manifest: DatasetManifest = toml::from_str(&text).map_err(|e| SdfError::File {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        manifest.validate()?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for e in &manifest.shapes {
            let file = dir.join(&e.file);
            if !file.is_file() {
                return Err(SdfError::File {
                    path: file,
                    message: format!("sample file for `{}` not found", e.id),
                });
            }
        }
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let text = toml::to_string(self).map_err(|e| SdfError::invalid(e.to_string()))?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn entries(&self, split: Split) -> impl Iterator<Item = &ShapeEntry> {
        self.shapes.iter().filter(move |e| e.split == split)
    }

    pub fn get(&self, id: &str) -> Option<&ShapeEntry> {
        self.shapes.iter().find(|e| e.id == id)
    }

    /// Loads the samples of one entry; `manifest_dir` resolves relative paths.
    pub fn load_entry(&self, entry: &ShapeEntry, manifest_dir: &Path) -> Result<ShapeSamples> {
        let mut samples = load_samples(&manifest_dir.join(&entry.file), &entry.id)?;
        if samples.len() != entry.count {
            return Err(SdfError::invalid(format!(
                "`{}` lists {} samples but the file holds {}",
                entry.id,
                entry.count,
                samples.len()
            )));
        }
        samples.source = entry.source.clone();
        Ok(samples)
    }
}
