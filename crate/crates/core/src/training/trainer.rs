use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::LossConfig;
use super::objective::{objective_batch, regularizer_weight, BatchRow, BatchStats};
use super::optim::{adam_step, sgd_step, MomentBuffer, OptimizerKind};
use super::{CurriculumSchedule, LatentBank, TrainConfig};
use crate::dataset::{SdfSample, ShapeSamples};
use crate::error::{Result, SdfError};
use crate::model::{GradientScope, Layer, MlpNetwork, NetworkConfig};
use crate::rng;

pub const LOG_HEADER: [&str; 10] = [
    "epoch",
    "stage_index",
    "epsilon",
    "lambda",
    "alpha",
    "mean_loss",
    "frac_hard",
    "frac_semihard",
    "frac_easy",
    "wall_ms",
];

/// One row of the training log. `mean_loss` is the mean per-point
/// curriculum loss over the epoch, without the latent regulariser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub epoch: usize,
    pub stage_index: usize,
    pub epsilon: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub mean_loss: f64,
    pub frac_hard: f64,
    pub frac_semihard: f64,
    pub frac_easy: f64,
    pub wall_ms: u64,
}

impl LogRow {
    /// Equality ignoring the wall-clock column.
    pub fn same_training(&self, other: &LogRow) -> bool {
        LogRow { wall_ms: 0, ..self.clone() } == LogRow { wall_ms: 0, ..other.clone() }
    }
}

/// Adam moments for the weight and bias of every layer.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct NetworkMoments {
    pub(crate) hidden: Vec<[MomentBuffer; 2]>,
    pub(crate) output: [MomentBuffer; 2],
}

impl NetworkMoments {
    fn for_layer(l: &Layer) -> [MomentBuffer; 2] {
        [MomentBuffer::zeros(l.weight.len()), MomentBuffer::zeros(l.bias.len())]
    }

    fn new(net: &MlpNetwork) -> Self {
        NetworkMoments {
            hidden: net.hidden_layers().iter().map(Self::for_layer).collect(),
            output: Self::for_layer(net.output_layer()),
        }
    }
}

/// Owns the network, the latent bank and the optimiser state, and runs the
/// curriculum epoch by epoch.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub(crate) samples: Vec<Vec<SdfSample>>,
    pub(crate) net: MlpNetwork,
    pub(crate) bank: LatentBank,
    pub(crate) schedule: CurriculumSchedule,
    pub(crate) cfg: TrainConfig,
    pub(crate) moments: NetworkMoments,
    pub(crate) epoch: usize,
    pub(crate) tag: String,
    reg_weights: Vec<f64>,
}

impl Trainer {
    /// Fresh network at the schedule's initial depth and a fresh latent bank.
    pub fn new(dataset: &[ShapeSamples], net_cfg: NetworkConfig, schedule: CurriculumSchedule, cfg: TrainConfig) -> Result<Self> {
        let net = MlpNetwork::new(net_cfg, schedule.initial_depth(), rng::mix(cfg.seed, 1))?;
        Self::with_network(dataset, net, schedule, cfg)
    }

    pub fn with_network(dataset: &[ShapeSamples], net: MlpNetwork, schedule: CurriculumSchedule, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        schedule.validate()?;
        if dataset.is_empty() {
            return Err(SdfError::invalid("dataset has no shapes"));
        }
        if let Some(s) = dataset.iter().find(|s| s.is_empty()) {
            return Err(SdfError::invalid(format!("shape `{}` has no samples", s.shape_id)));
        }
        check_schedule_fits(&net, &schedule)?;
        let ids: Vec<String> = dataset.iter().map(|s| s.shape_id.clone()).collect();
        let bank = LatentBank::new(ids, net.latent_dim(), cfg.latent_init_std, rng::mix(cfg.seed, 2))?;
        let reg_weights = dataset.iter().map(|s| regularizer_weight(cfg.sigma, s.len())).collect();
        Ok(Trainer {
            samples: dataset.iter().map(|s| s.samples.clone()).collect(),
            moments: NetworkMoments::new(&net),
            net,
            bank,
            schedule,
            cfg,
            epoch: 0,
            tag: String::new(),
            reg_weights,
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn restore(
        dataset: &[ShapeSamples],
        net: MlpNetwork,
        bank: LatentBank,
        moments: NetworkMoments,
        epoch: usize,
        tag: String,
        schedule: CurriculumSchedule,
        cfg: TrainConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        schedule.validate()?;
        let ids: Vec<String> = dataset.iter().map(|s| s.shape_id.clone()).collect();
        if bank.ids != ids {
            return Err(SdfError::invalid("checkpoint latent bank does not match the dataset's shapes"));
        }
        if epoch > schedule.total_epochs {
            return Err(SdfError::Schedule(format!("checkpoint epoch {epoch} is past the schedule end")));
        }
        Ok(Trainer {
            samples: dataset.iter().map(|s| s.samples.clone()).collect(),
            reg_weights: dataset.iter().map(|s| regularizer_weight(cfg.sigma, s.len())).collect(),
            net,
            bank,
            moments,
            schedule,
            cfg,
            epoch,
            tag,
        })
    }

    pub fn network(&self) -> &MlpNetwork {
        &self.net
    }

    pub fn bank(&self) -> &LatentBank {
        &self.bank
    }

    pub fn schedule(&self) -> &CurriculumSchedule {
        &self.schedule
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    /// Next epoch to run.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn is_finished(&self) -> bool {
        self.epoch >= self.schedule.total_epochs
    }

    /// Free-form label stored in checkpoints (the CLI stores the config hash).
    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn set_tag(&mut self, tag: impl Into<String>) {
        self.tag = tag.into();
    }

    pub fn into_parts(self) -> (MlpNetwork, LatentBank) {
        (self.net, self.bank)
    }

    /// Brings depth and fade-in weight in line with the stage of the next
    /// epoch. Idempotent.
    fn apply_stage(&mut self) -> Result<(usize, LossConfig, f64)> {
        let (index, stage, alpha) = self.schedule.stage_for_epoch(self.epoch)?;
        let stage = *stage;
        while self.net.growth().active_depth < stage.depth {
            if self.net.growth().fading {
                self.net.set_alpha(1.0)?;
            }
            let depth = self.net.growth().active_depth;
            self.net.grow(rng::mix(self.cfg.seed, 100 + depth as u64))?;
            let layer = self.net.hidden_layers().last().unwrap();
            self.moments.hidden.push(NetworkMoments::for_layer(layer));
        }
        let alpha = if stage.residual_fade { alpha } else { 1.0 };
        if self.net.growth().fading || alpha != 1.0 {
            self.net.set_alpha(alpha)?;
        }
        let loss = LossConfig {
            delta: self.cfg.delta,
            epsilon: stage.epsilon,
            lambda: stage.lambda,
        };
        loss.validate()?;
        Ok((index, loss, self.net.growth().alpha))
    }

    pub fn run_epoch(&mut self) -> Result<LogRow> {
        let start = Instant::now();
        let (stage_index, loss, alpha) = self.apply_stage()?;
        let mut rng = rng::stream(self.cfg.seed, 1_000_000 + self.epoch as u64);
        let mut stats = BatchStats::default();
        let mut order: Vec<usize> = (0..self.samples.len()).collect();
        for _ in 0..self.cfg.passes_per_epoch {
            order.shuffle(&mut rng);
            for group in order.chunks(self.cfg.shapes_per_step) {
                let mut rows = Vec::with_capacity(group.len() * self.cfg.points_per_shape);
                for &shape in group {
                    let pool = &self.samples[shape];
                    for _ in 0..self.cfg.points_per_shape {
                        let s = pool[rng.random_range(0..pool.len())];
                        rows.push(BatchRow { shape, x: s.x, s: s.s });
                    }
                }
                let step = self.step(&rows, &loss)?;
                stats.merge(&step);
            }
        }
        let n = stats.rows as f64;
        let row = LogRow {
            epoch: self.epoch,
            stage_index,
            epsilon: loss.epsilon,
            lambda: loss.lambda,
            alpha,
            mean_loss: stats.loss_sum / n,
            frac_hard: stats.hard as f64 / n,
            frac_semihard: stats.semi_hard as f64 / n,
            frac_easy: stats.easy as f64 / n,
            wall_ms: start.elapsed().as_millis() as u64,
        };
        if !row.mean_loss.is_finite() {
            return Err(SdfError::invalid(format!("training diverged at epoch {}", self.epoch)));
        }
        self.epoch += 1;
        Ok(row)
    }

    fn step(&mut self, rows: &[BatchRow], loss: &LossConfig) -> Result<BatchStats> {
        let (_, stats, grads) = objective_batch(
            &self.net,
            &self.bank,
            rows,
            loss,
            &self.reg_weights,
            GradientScope::Full,
            self.cfg.chunk_rows,
        )?;
        let lr = self.cfg.lr_network;
        let kind = self.cfg.optimizer;
        let hyper = self.cfg.adam;
        let moments = &mut self.moments;
        let (hidden, output) = self.net.layers_mut();
        let update = |l: &mut Layer, g: &Layer, m: &mut [MomentBuffer; 2]| match kind {
            OptimizerKind::Adam => {
                adam_step(&mut l.weight, &g.weight, &mut m[0], lr, &hyper);
                adam_step(&mut l.bias, &g.bias, &mut m[1], lr, &hyper);
            }
            OptimizerKind::Sgd => {
                sgd_step(&mut l.weight, &g.weight, lr);
                sgd_step(&mut l.bias, &g.bias, lr);
            }
        };
        for ((l, g), m) in hidden.iter_mut().zip(&grads.hidden).zip(&mut moments.hidden) {
            update(l, g, m);
        }
        update(output, grads.output.as_ref().unwrap(), &mut moments.output);
        for (i, g) in &grads.latents {
            let code = &mut self.bank.codes[*i].0;
            match kind {
                OptimizerKind::Adam => adam_step(code, g, &mut self.bank.moments[*i], self.cfg.lr_latent, &hyper),
                OptimizerKind::Sgd => sgd_step(code, g, self.cfg.lr_latent),
            }
        }
        Ok(stats)
    }

    /// Runs epochs until `end_epoch` (clamped to the schedule), calling
    /// `on_epoch` after each. A layer still fading in when the schedule ends
    /// is fused.
    pub fn train_until(&mut self, end_epoch: usize, mut on_epoch: impl FnMut(&Trainer, &LogRow) -> Result<()>) -> Result<Vec<LogRow>> {
        let end = end_epoch.min(self.schedule.total_epochs);
        let mut log = Vec::new();
        while self.epoch < end {
            let row = self.run_epoch()?;
            on_epoch(self, &row)?;
            log.push(row);
        }
        if self.is_finished() && self.net.growth().fading {
            self.net.set_alpha(1.0)?;
        }
        Ok(log)
    }

    pub fn train(&mut self) -> Result<Vec<LogRow>> {
        self.train_until(usize::MAX, |_, _| Ok(()))
    }
}

fn check_schedule_fits(net: &MlpNetwork, schedule: &CurriculumSchedule) -> Result<()> {
    let g = net.growth();
    if g.fading {
        return Err(SdfError::Schedule("network is mid fade-in".into()));
    }
    if g.active_depth != schedule.initial_depth() {
        return Err(SdfError::Schedule(format!(
            "network depth {} does not match the schedule's initial depth {}",
            g.active_depth,
            schedule.initial_depth()
        )));
    }
    if schedule.final_depth() > net.config().max_depth {
        return Err(SdfError::Schedule(format!(
            "schedule reaches depth {} but the network allows {}",
            schedule.final_depth(),
            net.config().max_depth
        )));
    }
    if schedule.final_depth() > g.active_depth && g.active_depth <= net.config().skip_layer {
        return Err(SdfError::Schedule(format!(
            "layers can only be added after the skip layer {}; initial depth {} is too shallow",
            net.config().skip_layer,
            g.active_depth
        )));
    }
    Ok(())
}
