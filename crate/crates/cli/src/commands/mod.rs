mod eval;
mod reconstruct;
mod sample;
mod train;

pub use eval::{cmd_eval, EvalOptions};
pub use reconstruct::{cmd_reconstruct, cmd_recover, CodeSource, ReconstructOptions};
pub use sample::cmd_sample_data;
pub use train::{cmd_train, read_log, TrainOptions};

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use csdf::dataset::{DatasetManifest, ShapeEntry, ShapeSource, Split, ANALYTIC_SURFACE_RESOLUTION};
use csdf::extraction::{evaluate_grid, marching_cubes, mesh_analytic};
use csdf::geometry::{io, Aabb, TriangleMesh};
use csdf::model::{LatentCode, MlpNetwork};
use csdf::training::{read_state, CheckpointState};

use crate::config::{ExtractionSection, Provenance};
use crate::{usage_error, SplitArg, UsageExt};

pub(crate) fn load_manifest(path: &Path) -> anyhow::Result<DatasetManifest> {
    if !path.is_file() {
        return Err(usage_error(format!("dataset manifest {} not found (run sample-data first)", path.display())));
    }
    DatasetManifest::load(path).usage()
}

pub(crate) fn entries(manifest: &DatasetManifest, split: SplitArg) -> Vec<ShapeEntry> {
    manifest
        .shapes
        .iter()
        .filter(|e| match split {
            SplitArg::All => true,
            SplitArg::Train => e.split == Split::Train,
            SplitArg::Test => e.split == Split::Test,
        })
        .cloned()
        .collect()
}

pub(crate) fn read_checkpoint(path: &Path) -> anyhow::Result<CheckpointState> {
    let bytes = fs::read(path)
        .with_context(|| format!("cannot read checkpoint {}", path.display()))
        .usage()?;
    let state = read_state(&bytes)
        .with_context(|| format!("invalid checkpoint {}", path.display()))
        .usage()?;
    if state.net.growth().fading {
        return Err(usage_error(format!("checkpoint {} stops in the middle of a layer fade-in", path.display())));
    }
    Ok(state)
}

pub(crate) fn read_mesh(path: &Path) -> anyhow::Result<TriangleMesh> {
    let mesh = match path.extension().and_then(|e| e.to_str()) {
        Some("ply") => io::read_ply(path)?,
        _ => io::read_obj(path)?,
    };
    Ok(mesh)
}

/// The reference surface of a dataset shape: marching cubes of the exact
/// field for analytic shapes, the unit-sphere-normalised mesh otherwise.
pub(crate) fn ground_truth(source: &ShapeSource) -> anyhow::Result<TriangleMesh> {
    match source {
        ShapeSource::Analytic { shape } => Ok(mesh_analytic(shape, ANALYTIC_SURFACE_RESOLUTION)?),
        ShapeSource::Mesh { path } => Ok(read_mesh(path)?.normalize_to_unit_sphere()?.0),
        ShapeSource::Unknown => anyhow::bail!("no ground truth recorded for this shape"),
    }
}

pub fn extract(net: &MlpNetwork, code: &LatentCode, ext: &ExtractionSection) -> anyhow::Result<TriangleMesh> {
    let grid = evaluate_grid(net, code, ext.resolution, Aabb::cube(ext.bound))?;
    Ok(marching_cubes(&grid, 0.0)?)
}

/// A CSV writer whose file starts with a `#` provenance line. With
/// `headers`, the header row is derived from the first serialized record.
pub(crate) fn csv_with_provenance(path: &Path, prov: &Provenance, headers: bool) -> anyhow::Result<csv::Writer<fs::File>> {
    let mut file = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    writeln!(file, "# {}", prov.line())?;
    Ok(csv::WriterBuilder::new().has_headers(headers).from_writer(file))
}

pub(crate) fn write_run_config(dir: &Path, cfg: &crate::RunConfig, prov: &Provenance) -> anyhow::Result<()> {
    fs::write(dir.join("run.toml"), format!("# {}\n{}", prov.line(), cfg.to_toml()))?;
    Ok(())
}
