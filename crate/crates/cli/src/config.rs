//! The run configuration: one TOML file with a section per pipeline stage.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use csdf::dataset::{SamplingConfig, Split};
use csdf::geometry::AnalyticShape;
use csdf::inference::InferenceConfig;
use csdf::metrics::MetricProtocol;
use csdf::model::NetworkConfig;
use csdf::training::{CurriculumSchedule, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::presets;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Copied into the sampling, training and inference seeds.
    pub seed: u64,
    /// Root of every output directory.
    pub out: PathBuf,
    pub dataset: DatasetSection,
    pub sampling: SamplingConfig,
    pub network: NetworkConfig,
    pub schedule: ScheduleSection,
    pub training: TrainConfig,
    pub inference: InferenceConfig,
    pub extraction: ExtractionSection,
    pub metrics: MetricProtocol,
    pub recover: RecoverSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out: PathBuf::from("out"),
            dataset: DatasetSection::default(),
            sampling: SamplingConfig::default(),
            network: NetworkConfig::default(),
            schedule: ScheduleSection::default(),
            training: TrainConfig::default(),
            inference: InferenceConfig::default(),
            extraction: ExtractionSection::default(),
            metrics: MetricProtocol::default(),
            recover: RecoverSection::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    /// Where sample files and the manifest live; `<out>/data` when unset.
    pub dir: Option<PathBuf>,
    /// Built-in shape list added before `shape` entries (see [`presets`]).
    pub preset: Option<String>,
    #[serde(rename = "shape")]
    pub shapes: Vec<ShapeSpec>,
}

/// One input shape: an analytic solid or a mesh file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeSpec {
    pub id: String,
    #[serde(default = "default_split")]
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic: Option<AnalyticShape>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<PathBuf>,
}

fn default_split() -> Split {
    Split::Train
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// Table-style curriculum with boundaries scaled to `epochs`.
    Curriculum,
    /// Plain clamped L1 at a fixed depth.
    Baseline,
    /// Stages read from `file`.
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub kind: ScheduleKind,
    pub epochs: usize,
    pub file: Option<PathBuf>,
    pub baseline_depth: usize,
    pub checkpoint_every: usize,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        ScheduleSection {
            kind: ScheduleKind::Curriculum,
            epochs: 300,
            file: None,
            baseline_depth: 8,
            checkpoint_every: 10,
        }
    }
}

impl ScheduleSection {
    pub fn build(&self) -> anyhow::Result<CurriculumSchedule> {
        let schedule = match self.kind {
            ScheduleKind::Curriculum => CurriculumSchedule::scaled(self.epochs)?,
            ScheduleKind::Baseline => CurriculumSchedule::baseline(self.epochs, self.baseline_depth)?,
            ScheduleKind::File => {
                let path = self.file.as_ref().context("schedule kind `file` needs `schedule.file`")?;
                CurriculumSchedule::load(path)?
            }
        };
        Ok(schedule)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionSection {
    pub resolution: usize,
    /// Half-width of the cube the field is sampled in.
    pub bound: f64,
}

impl Default for ExtractionSection {
    fn default() -> Self {
        ExtractionSection {
            resolution: 128,
            bound: csdf::extraction::DEFAULT_BOUND,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoverSection {
    pub ratios: Vec<f64>,
}

impl Default for RecoverSection {
    fn default() -> Self {
        RecoverSection {
            ratios: vec![0.05, 0.10, 0.15, 0.20, 0.25],
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Propagates the global seed into the per-stage configs.
    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.sampling.seed = seed;
        self.training.seed = seed;
        self.inference.seed = seed;
    }

    pub fn data_dir(&self) -> PathBuf {
        self.dataset.dir.clone().unwrap_or_else(|| self.out.join("data"))
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.data_dir().join("manifest.toml")
    }

    pub fn train_dir(&self) -> PathBuf {
        self.out.join("train")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.train_dir().join("checkpoint.bin")
    }

    /// Preset shapes followed by explicitly listed ones.
    pub fn shapes(&self) -> anyhow::Result<Vec<ShapeSpec>> {
        let mut shapes = match &self.dataset.preset {
            Some(name) => presets::by_name(name)?,
            None => Vec::new(),
        };
        shapes.extend(self.dataset.shapes.iter().cloned());
        Ok(shapes)
    }

    /// Checks everything that can be checked before running.
    pub fn validate(&self) -> anyhow::Result<()> {
        self.sampling.validate()?;
        self.network.validate()?;
        self.training.validate()?;
        self.inference.validate()?;
        if self.extraction.resolution < 2 || self.extraction.bound.is_nan() || self.extraction.bound <= 0.0 {
            bail!("extraction needs resolution ≥ 2 and a positive bound");
        }
        if self.schedule.checkpoint_every == 0 {
            bail!("schedule.checkpoint_every must be at least 1");
        }
        if let Some(file) = &self.schedule.file {
            if self.schedule.kind == ScheduleKind::File && !file.is_file() {
                bail!("schedule file {} not found", file.display());
            }
        }
        for r in &self.recover.ratios {
            if !(*r > 0.0 && *r < 1.0) {
                bail!("removal ratio {r} must lie in (0, 1)");
            }
        }
        let mut seen = std::collections::HashSet::new();
        for s in self.shapes()? {
            if !seen.insert(s.id.clone()) {
                bail!("duplicate shape id `{}`", s.id);
            }
            if s.id.is_empty() || s.id.contains(['/', '\\']) {
                bail!("shape id `{}` must be a non-empty file name", s.id);
            }
            match (&s.analytic, &s.mesh) {
                (Some(_), None) => {}
                (None, Some(path)) => {
                    if !path.is_file() {
                        bail!("mesh for shape `{}` not found: {}", s.id, path.display());
                    }
                }
                _ => bail!("shape `{}` needs exactly one of `analytic` or `mesh`", s.id),
            }
        }
        Ok(())
    }

    /// Short SHA-256 of the canonical TOML form. Output locations are left
    /// out, so moving a run does not change its hash.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = PathBuf::new();
        canonical.dataset.dir = None;
        let text = toml::to_string(&canonical).expect("config serializes");
        Sha256::digest(text.as_bytes())[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Provenance written into every artifact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn of(cfg: &RunConfig) -> Self {
        Provenance {
            config_hash: cfg.hash(),
            seed: cfg.seed,
        }
    }

    pub fn line(&self) -> String {
        format!("csdf config_hash={} seed={}", self.config_hash, self.seed)
    }
}
