use std::fs;
use std::path::Path;

use anyhow::Context;
use csdf::training::{LogRow, Trainer, LOG_HEADER};
use csdf::SdfError;
use log::info;

use super::{csv_with_provenance, entries, load_manifest, write_run_config};
use crate::config::Provenance;
use crate::{usage_error, Outcome, RunConfig, SplitArg, UsageExt};

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    pub resume: bool,
    /// Stop before this epoch, as if interrupted.
    pub until_epoch: Option<usize>,
}

/// Reads a training log written by [`cmd_train`].
pub fn read_log(path: &Path) -> anyhow::Result<Vec<LogRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("cannot read log {}", path.display()))?;
    Ok(reader.deserialize().collect::<Result<_, _>>()?)
}

/// Trains on the train split of the dataset. Writes `log.csv` (one row per
/// epoch), `checkpoint.bin` every `schedule.checkpoint_every` epochs and at
/// the end, and `run.toml`, all under `<out>/train`.
pub fn cmd_train(cfg: &RunConfig, opts: &TrainOptions) -> anyhow::Result<Outcome> {
    let manifest = load_manifest(&cfg.manifest_path())?;
    let dir = cfg.data_dir();
    let dataset = entries(&manifest, SplitArg::Train)
        .iter()
        .map(|e| manifest.load_entry(e, &dir))
        .collect::<Result<Vec<_>, _>>()
        .usage()?;
    if dataset.is_empty() {
        return Err(usage_error("the dataset has no training shapes"));
    }
    let schedule = cfg.schedule.build().usage()?;
    let prov = Provenance::of(cfg);
    let out = cfg.train_dir();
    fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    let ckpt = cfg.checkpoint_path();
    let log_path = out.join("log.csv");

    let (mut trainer, mut kept) = if opts.resume {
        if !ckpt.is_file() {
            return Err(usage_error(format!("--resume: no checkpoint at {}", ckpt.display())));
        }
        let trainer = Trainer::load_checkpoint(&ckpt, &dataset, schedule, cfg.training.clone()).usage()?;
        if trainer.tag() != prov.line() {
            return Err(usage_error(format!(
                "checkpoint was written by a different configuration ({}); current is {}",
                trainer.tag(),
                prov.line()
            )));
        }
        let previous = if log_path.is_file() { read_log(&log_path)? } else { Vec::new() };
        let kept: Vec<LogRow> = previous.into_iter().filter(|r| r.epoch < trainer.epoch()).collect();
        (trainer, kept)
    } else {
        let mut trainer = Trainer::new(&dataset, cfg.network.clone(), schedule, cfg.training.clone()).usage()?;
        trainer.set_tag(prov.line());
        (trainer, Vec::new())
    };
    write_run_config(&out, cfg, &prov)?;

    let mut log = csv_with_provenance(&log_path, &prov, false)?;
    log.write_record(LOG_HEADER)?;
    for row in kept.drain(..) {
        log.serialize(row)?;
    }
    log.flush()?;
    let every = cfg.schedule.checkpoint_every;
    let start = trainer.epoch();
    let to_io = |e: csv::Error| SdfError::Io(std::io::Error::other(e));
    trainer.train_until(opts.until_epoch.unwrap_or(usize::MAX), |t, row| {
        log.serialize(row).map_err(to_io)?;
        log.flush()?;
        if (row.epoch + 1) % every == 0 {
            t.save_checkpoint(&ckpt)?;
        }
        if row.epoch % 10 == 0 {
            info!(
                "epoch {} stage {} loss {:.5} hard {:.3} ({} ms)",
                row.epoch, row.stage_index, row.mean_loss, row.frac_hard, row.wall_ms
            );
        }
        Ok(())
    })?;
    trainer.save_checkpoint(&ckpt)?;
    println!(
        "trained epochs {}..{} of {}; checkpoint {}",
        start,
        trainer.epoch(),
        trainer.schedule().total_epochs,
        ckpt.display()
    );
    Ok(Outcome::default())
}
