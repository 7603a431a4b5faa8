use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use clap::ValueEnum;
use csdf::dataset::{remove_local_part, ShapeEntry};
use csdf::geometry::io::write_obj;
use csdf::inference::{estimate_latent, recover_missing_part};
use csdf::metrics::evaluate_reconstruction;
use csdf::rng;
use log::{error, warn};
use rayon::prelude::*;
use serde::Serialize;

use super::{csv_with_provenance, entries, extract, ground_truth, load_manifest, read_checkpoint, write_run_config};
use crate::config::Provenance;
use crate::{usage_error, Outcome, RunConfig, SplitArg};

/// Ratios above this are outside the range the method was evaluated on.
const TESTED_RATIO_LIMIT: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CodeSource {
    /// Fit a code to the shape's samples.
    Fit,
    /// Use the code learned for the shape during training.
    Trained,
}

#[derive(Debug, Clone)]
pub struct ReconstructOptions {
    /// Defaults to `<out>/train/checkpoint.bin`.
    pub checkpoint: Option<PathBuf>,
    pub split: SplitArg,
    pub codes: CodeSource,
}

#[derive(Debug, Serialize)]
struct ReconstructRow {
    shape_id: String,
    status: &'static str,
    objective: Option<f64>,
    vertices: usize,
    triangles: usize,
}

#[derive(Debug, Serialize)]
struct RecoverRow {
    shape_id: String,
    ratio: f64,
    status: &'static str,
    removed: usize,
    objective: Option<f64>,
    cd_mean_raw: Option<f64>,
    cd_x1000: Option<f64>,
    emd: Option<f64>,
    mesh_acc_raw: Option<f64>,
    mesh_acc_x10: Option<f64>,
}

fn selected(cfg: &RunConfig, split: SplitArg) -> anyhow::Result<Vec<ShapeEntry>> {
    let manifest = load_manifest(&cfg.manifest_path())?;
    let chosen = entries(&manifest, split);
    if chosen.is_empty() {
        return Err(usage_error(format!("no {split:?} shapes in {}", cfg.manifest_path().display()).to_lowercase()));
    }
    Ok(chosen)
}

/// Writes `<out>/reconstruct/<id>.obj` for every shape of the split and a
/// `reconstruct.csv` summary.
pub fn cmd_reconstruct(cfg: &RunConfig, opts: &ReconstructOptions) -> anyhow::Result<Outcome> {
    let ckpt = opts.checkpoint.clone().unwrap_or_else(|| cfg.checkpoint_path());
    let state = read_checkpoint(&ckpt)?;
    let shapes = selected(cfg, opts.split)?;
    let out = cfg.out.join("reconstruct");
    fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    let prov = Provenance::of(cfg);
    let data_dir = cfg.data_dir();

    let rows: Vec<ReconstructRow> = shapes
        .par_iter()
        .map(|entry| {
            let result = (|| -> anyhow::Result<(Option<f64>, csdf::geometry::TriangleMesh)> {
                let (code, objective) = match opts.codes {
                    CodeSource::Fit => {
                        let samples = csdf::dataset::load_samples(&data_dir.join(&entry.file), &entry.id)?;
                        let fit = estimate_latent(&state.net, &samples, &cfg.inference)?;
                        (fit.code, Some(fit.objective))
                    }
                    CodeSource::Trained => (state.bank.get(&entry.id)?.clone(), None),
                };
                let mesh = extract(&state.net, &code, &cfg.extraction)?;
                let comments = [prov.line(), format!("shape {}", entry.id)];
                write_obj(&mesh, &out.join(format!("{}.obj", entry.id)), &comments)?;
                Ok((objective, mesh))
            })();
            match result {
                Ok((objective, mesh)) => ReconstructRow {
                    shape_id: entry.id.clone(),
                    status: if mesh.is_empty() { "empty" } else { "ok" },
                    objective,
                    vertices: mesh.vertices().len(),
                    triangles: mesh.triangles().len(),
                },
                Err(e) => {
                    error!("shape `{}`: {e:#}", entry.id);
                    ReconstructRow {
                        shape_id: entry.id.clone(),
                        status: "error",
                        objective: None,
                        vertices: 0,
                        triangles: 0,
                    }
                }
            }
        })
        .collect();

    let mut csv = csv_with_provenance(&out.join("reconstruct.csv"), &prov, true)?;
    let mut outcome = Outcome::default();
    for row in rows {
        println!("{:<20} {:>6} triangles {:>8}", row.shape_id, row.status, row.triangles);
        if row.status != "ok" {
            outcome.failures.push(row.shape_id.clone());
        }
        csv.serialize(row)?;
    }
    csv.flush()?;
    write_run_config(&out, cfg, &prov)?;
    Ok(outcome)
}

/// Shape completion: for each shape and ratio, removes a local part of the
/// samples, fits a code to the rest and evaluates the completed surface.
/// Writes `<out>/recover/<id>_r<percent>.obj` and `recover.csv`.
pub fn cmd_recover(cfg: &RunConfig, opts: &ReconstructOptions) -> anyhow::Result<Outcome> {
    let ckpt = opts.checkpoint.clone().unwrap_or_else(|| cfg.checkpoint_path());
    let state = read_checkpoint(&ckpt)?;
    let shapes = selected(cfg, opts.split)?;
    for &r in &cfg.recover.ratios {
        if r > TESTED_RATIO_LIMIT {
            warn!("removal ratio {r} is beyond the tested range (≤ {TESTED_RATIO_LIMIT})");
            eprintln!("warning: removal ratio {r} is beyond the tested range (≤ {TESTED_RATIO_LIMIT})");
        }
    }
    let out = cfg.out.join("recover");
    fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    let prov = Provenance::of(cfg);
    let data_dir = cfg.data_dir();

    let jobs: Vec<(usize, &ShapeEntry, f64)> = shapes
        .iter()
        .enumerate()
        .flat_map(|(i, e)| cfg.recover.ratios.iter().map(move |&r| (i, e, r)))
        .collect();
    let rows: Vec<RecoverRow> = jobs
        .par_iter()
        .map(|&(i, entry, ratio)| {
            let mut row = RecoverRow {
                shape_id: entry.id.clone(),
                ratio,
                status: "ok",
                removed: 0,
                objective: None,
                cd_mean_raw: None,
                cd_x1000: None,
                emd: None,
                mesh_acc_raw: None,
                mesh_acc_x10: None,
            };
            let result = (|| -> anyhow::Result<()> {
                let samples = csdf::dataset::load_samples(&data_dir.join(&entry.file), &entry.id)?;
                // One removal centre per shape, so larger ratios remove supersets.
                let partial = remove_local_part(&samples, ratio, rng::mix(cfg.seed, 1000 + i as u64))?;
                row.removed = samples.len() - partial.len();
                let fit = recover_missing_part(&state.net, &partial, &cfg.inference)?;
                row.objective = Some(fit.objective);
                let mesh = extract(&state.net, &fit.code, &cfg.extraction)?;
                let name = format!("{}_r{:02}.obj", entry.id, (ratio * 100.0).round() as u32);
                write_obj(&mesh, &out.join(name), &[prov.line(), format!("shape {} ratio {ratio}", entry.id)])?;
                let gt = ground_truth(&entry.source)?;
                let m = evaluate_reconstruction(&entry.id, &mesh, &gt, &cfg.metrics)?;
                row.cd_mean_raw = Some(m.cd_mean_raw);
                row.cd_x1000 = Some(m.cd_x1000);
                row.emd = Some(m.emd);
                row.mesh_acc_raw = Some(m.mesh_acc_raw);
                row.mesh_acc_x10 = Some(m.mesh_acc_x10);
                Ok(())
            })();
            if let Err(e) = result {
                error!("shape `{}` ratio {ratio}: {e:#}", entry.id);
                row.status = "error";
            }
            row
        })
        .collect();

    let mut csv = csv_with_provenance(&out.join("recover.csv"), &prov, true)?;
    let mut outcome = Outcome::default();
    for row in rows {
        println!(
            "{:<20} ratio {:>5.2} {:>6} cd {:>12} acc {:>12}",
            row.shape_id,
            row.ratio,
            row.status,
            row.cd_mean_raw.map_or("-".into(), |v| format!("{v:.4e}")),
            row.mesh_acc_raw.map_or("-".into(), |v| format!("{v:.4e}")),
        );
        if row.status != "ok" && !outcome.failures.contains(&row.shape_id) {
            outcome.failures.push(row.shape_id.clone());
        }
        csv.serialize(row)?;
    }
    csv.flush()?;
    write_run_config(&out, cfg, &prov)?;
    Ok(outcome)
}
