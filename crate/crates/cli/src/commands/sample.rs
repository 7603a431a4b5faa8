use std::fs;

use anyhow::Context;
use csdf::dataset::{generate_samples, save_samples, DatasetManifest, SamplingConfig, SdfOracle, ShapeEntry, ShapeSamples, ShapeSource};
use csdf::geometry::MeshSdf;
use csdf::rng;
use log::{error, info};
use rayon::prelude::*;

use super::{read_mesh, write_run_config};
use crate::config::{Provenance, ShapeSpec};
use crate::{usage_error, Outcome, RunConfig};

fn sample_one(spec: &ShapeSpec, cfg: &SamplingConfig) -> anyhow::Result<ShapeSamples> {
    let (oracle, source) = match (&spec.analytic, &spec.mesh) {
        (Some(shape), _) => (SdfOracle::Analytic(shape.clone()), ShapeSource::Analytic { shape: shape.clone() }),
        (None, Some(path)) => {
            let mesh = read_mesh(path).with_context(|| format!("cannot read mesh {}", path.display()))?;
            let (unit, _, _) = mesh.normalize_to_unit_sphere()?;
            (SdfOracle::Mesh(MeshSdf::new(unit)?), ShapeSource::Mesh { path: path.clone() })
        }
        (None, None) => anyhow::bail!("no geometry given"),
    };
    Ok(generate_samples(&spec.id, &oracle, source, cfg)?)
}

/// Writes `<id>.sdf` for every configured shape plus `manifest.toml`, and
/// prints per-shape statistics.
pub fn cmd_sample_data(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let shapes = cfg.shapes()?;
    if shapes.is_empty() {
        return Err(usage_error("no shapes configured (set dataset.preset or add [[dataset.shape]] entries)"));
    }
    let dir = cfg.data_dir();
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let prov = Provenance::of(cfg);

    let results: Vec<(ShapeEntry, anyhow::Result<ShapeSamples>)> = shapes
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let seed = rng::mix(cfg.sampling.seed, i as u64);
            let sampling = SamplingConfig { seed, ..cfg.sampling.clone() };
            let entry = ShapeEntry {
                id: spec.id.clone(),
                file: format!("{}.sdf", spec.id).into(),
                count: sampling.count,
                seed,
                split: spec.split,
                source: ShapeSource::Unknown,
            };
            let result = sample_one(spec, &sampling).and_then(|s| {
                save_samples(&s, &dir.join(&entry.file))?;
                Ok(s)
            });
            (entry, result)
        })
        .collect();

    let mut manifest = DatasetManifest {
        tag: prov.line(),
        sampling: cfg.sampling.clone(),
        shapes: Vec::new(),
    };
    let mut outcome = Outcome::default();
    println!("{:<20} {:>6} {:>8} {:>10} {:>10} {:>10}", "shape", "split", "count", "|s|<0.05", "inside", "max|s|");
    for (mut entry, result) in results {
        match result {
            Ok(samples) => {
                let n = samples.len() as f64;
                let near = samples.samples.iter().filter(|s| s.s.abs() < 0.05).count() as f64 / n;
                let inside = samples.samples.iter().filter(|s| s.s < 0.0).count() as f64 / n;
                let max = samples.samples.iter().map(|s| s.s.abs()).fold(0.0, f64::max);
                println!(
                    "{:<20} {:>6} {:>8} {:>10.4} {:>10.4} {:>10.4}",
                    entry.id,
                    format!("{:?}", entry.split).to_lowercase(),
                    samples.len(),
                    near,
                    inside,
                    max
                );
                entry.source = samples.source;
                manifest.shapes.push(entry);
            }
            Err(e) => {
                error!("shape `{}`: {e:#}", entry.id);
                outcome.failures.push(entry.id);
            }
        }
    }
    manifest.save(&cfg.manifest_path())?;
    write_run_config(&dir, cfg, &prov)?;
    info!("wrote {} shapes to {}", manifest.shapes.len(), dir.display());
    Ok(outcome)
}
