use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use csdf::metrics::{evaluate_reconstruction, mean_and_median, MetricRecord};
use log::error;
use serde::Serialize;

use super::{csv_with_provenance, entries, ground_truth, load_manifest, read_mesh, write_run_config};
use crate::config::Provenance;
use crate::{usage_error, Outcome, RunConfig, SplitArg};

#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Directory with `<shape_id>.obj` (or `.ply`) predictions.
    pub pred_dir: PathBuf,
    /// Defaults to the configured dataset manifest.
    pub manifest: Option<PathBuf>,
    pub split: SplitArg,
}

#[derive(Debug, Serialize)]
struct EvalRow {
    shape_id: String,
    status: String,
    cd_mean_raw: Option<f64>,
    cd_x1000: Option<f64>,
    emd: Option<f64>,
    mesh_acc_raw: Option<f64>,
    mesh_acc_x10: Option<f64>,
    pred_seed: u64,
    gt_seed: u64,
    cd_points: usize,
    emd_points: usize,
    accuracy_points: usize,
}

impl EvalRow {
    fn flagged(id: &str, status: &str, cfg: &RunConfig) -> Self {
        EvalRow {
            shape_id: id.to_owned(),
            status: status.to_owned(),
            cd_mean_raw: None,
            cd_x1000: None,
            emd: None,
            mesh_acc_raw: None,
            mesh_acc_x10: None,
            pred_seed: cfg.metrics.pred_seed,
            gt_seed: cfg.metrics.gt_seed,
            cd_points: cfg.metrics.cd_points,
            emd_points: cfg.metrics.emd_points,
            accuracy_points: cfg.metrics.accuracy_points,
        }
    }

    fn from_record(r: MetricRecord) -> Self {
        EvalRow {
            shape_id: r.shape_id,
            status: "ok".into(),
            cd_mean_raw: Some(r.cd_mean_raw),
            cd_x1000: Some(r.cd_x1000),
            emd: Some(r.emd),
            mesh_acc_raw: Some(r.mesh_acc_raw),
            mesh_acc_x10: Some(r.mesh_acc_x10),
            pred_seed: r.pred_seed,
            gt_seed: r.gt_seed,
            cd_points: r.cd_points,
            emd_points: r.emd_points,
            accuracy_points: r.accuracy_points,
        }
    }
}

/// Writes `<out>/eval/metrics.csv`: one row per shape plus `mean` and
/// `median` rows over the shapes that evaluated. Shapes without a
/// prediction are flagged `missing` and make the command exit with 1.
pub fn cmd_eval(cfg: &RunConfig, opts: &EvalOptions) -> anyhow::Result<Outcome> {
    if !opts.pred_dir.is_dir() {
        return Err(usage_error(format!("prediction directory {} not found", opts.pred_dir.display())));
    }
    let manifest_path = opts.manifest.clone().unwrap_or_else(|| cfg.manifest_path());
    let manifest = load_manifest(&manifest_path)?;
    let shapes = entries(&manifest, opts.split);
    if shapes.is_empty() {
        return Err(usage_error(format!("no shapes selected from {}", manifest_path.display())));
    }
    let out = cfg.out.join("eval");
    fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    let prov = Provenance::of(cfg);

    let mut outcome = Outcome::default();
    let mut rows = Vec::new();
    for entry in &shapes {
        let pred_path = ["obj", "ply"]
            .iter()
            .map(|ext| opts.pred_dir.join(format!("{}.{ext}", entry.id)))
            .find(|p| p.is_file());
        let Some(pred_path) = pred_path else {
            error!("no prediction for `{}` in {}", entry.id, opts.pred_dir.display());
            outcome.failures.push(entry.id.clone());
            rows.push(EvalRow::flagged(&entry.id, "missing", cfg));
            continue;
        };
        let result = (|| -> anyhow::Result<MetricRecord> {
            let pred = read_mesh(&pred_path)?;
            let gt = ground_truth(&entry.source)?;
            Ok(evaluate_reconstruction(&entry.id, &pred, &gt, &cfg.metrics)?)
        })();
        match result {
            Ok(record) => rows.push(EvalRow::from_record(record)),
            Err(e) => {
                error!("shape `{}`: {e:#}", entry.id);
                outcome.failures.push(entry.id.clone());
                rows.push(EvalRow::flagged(&entry.id, "error", cfg));
            }
        }
    }

    let mut csv = csv_with_provenance(&out.join("metrics.csv"), &prov, true)?;
    println!("{:<20} {:>8} {:>12} {:>12} {:>12}", "shape", "status", "cd_x1000", "emd", "acc_x10");
    let fmt = |v: Option<f64>| v.map_or("-".to_owned(), |v| format!("{v:.5}"));
    for row in &rows {
        println!(
            "{:<20} {:>8} {:>12} {:>12} {:>12}",
            row.shape_id,
            row.status,
            fmt(row.cd_x1000),
            fmt(row.emd),
            fmt(row.mesh_acc_x10)
        );
        csv.serialize(row)?;
    }
    let ok: Vec<&EvalRow> = rows.iter().filter(|r| r.status == "ok").collect();
    let column = |f: fn(&EvalRow) -> Option<f64>| mean_and_median(&ok.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
    let stats = [
        column(|r| r.cd_mean_raw),
        column(|r| r.cd_x1000),
        column(|r| r.emd),
        column(|r| r.mesh_acc_raw),
        column(|r| r.mesh_acc_x10),
    ];
    if stats.iter().all(Option::is_some) {
        for (name, pick) in [("mean", 0usize), ("median", 1)] {
            let v: Vec<f64> = stats.iter().map(|s| if pick == 0 { s.unwrap().0 } else { s.unwrap().1 }).collect();
            let row = EvalRow {
                cd_mean_raw: Some(v[0]),
                cd_x1000: Some(v[1]),
                emd: Some(v[2]),
                mesh_acc_raw: Some(v[3]),
                mesh_acc_x10: Some(v[4]),
                ..EvalRow::flagged(name, "aggregate", cfg)
            };
            println!("{:<20} {:>8} {:>12} {:>12} {:>12}", name, "", fmt(row.cd_x1000), fmt(row.emd), fmt(row.mesh_acc_x10));
            csv.serialize(&row)?;
        }
    }
    csv.flush()?;
    write_run_config(&out, cfg, &prov)?;
    Ok(outcome)
}
