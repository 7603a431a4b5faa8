//! Test-time latent fitting with the network frozen, for complete and
//! partial observations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{subset_indices, SdfSample, ShapeSamples};
use crate::error::{Result, SdfError};
use crate::geometry::Point3;
use crate::model::{GradientScope, LatentCode, MlpNetwork};
use crate::rng;
use crate::training::loss::point_loss;
use crate::training::{adam_step, regularizer_weight, AdamHyper, LossConfig, MomentBuffer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceConfig {
    pub iterations: usize,
    pub lr: f64,
    /// Iteration at which the learning rate is multiplied by `lr_decay`.
    pub lr_decay_at: usize,
    pub lr_decay: f64,
    pub sigma: f64,
    pub loss: LossConfig,
    pub init_std: f64,
    pub seed: u64,
    pub restarts: usize,
    /// Samples used for fitting, drawn once without replacement (all if
    /// fewer are available).
    pub max_points: usize,
    pub chunk_rows: usize,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            iterations: 800,
            lr: 1e-3,
            lr_decay_at: 400,
            lr_decay: 0.5,
            sigma: 1e-2,
            loss: LossConfig::default(),
            init_std: 0.01,
            seed: 0,
            restarts: 1,
            max_points: 4096,
            chunk_rows: 1024,
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if self.iterations == 0 || self.restarts == 0 || self.max_points == 0 || self.chunk_rows == 0 {
            return Err(SdfError::invalid("iterations, restarts, max_points and chunk_rows must be at least 1"));
        }
        if !(self.lr >= 0.0 && self.sigma > 0.0 && self.init_std >= 0.0 && self.lr_decay > 0.0) {
            return Err(SdfError::invalid("need lr ≥ 0, sigma > 0, init_std ≥ 0, lr_decay > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentFit {
    pub code: LatentCode,
    /// Objective of `code` (mean loss over the fitting points plus the
    /// regulariser `‖z‖²/(σ²K)`).
    pub objective: f64,
    /// Objective at the initial code of the winning restart.
    pub initial_objective: f64,
    /// Best-so-far objective after each iteration of the winning restart.
    pub best_history: Vec<f64>,
}

/// The fitting objective: samples are a fixed subset of the observation and
/// the regulariser is normalised by the full observation size, matching the
/// per-point weighting used during training.
pub struct FitProblem<'a> {
    net: &'a MlpNetwork,
    points: Vec<Point3>,
    targets: Vec<f64>,
    reg: f64,
    loss: LossConfig,
    chunk_rows: usize,
}

impl<'a> FitProblem<'a> {
    pub fn new(net: &'a MlpNetwork, samples: &ShapeSamples, cfg: &InferenceConfig) -> Result<Self> {
        cfg.validate()?;
        if samples.is_empty() {
            return Err(SdfError::invalid(format!("shape `{}` has no samples to fit", samples.shape_id)));
        }
        if net.growth().fading {
            return Err(SdfError::invalid("network is still fading in a layer; fuse it before inference"));
        }
        let idx = subset_indices(samples.len(), cfg.max_points, rng::mix(cfg.seed, 7));
        let chosen: Vec<SdfSample> = idx.iter().map(|&i| samples.samples[i]).collect();
        Ok(FitProblem {
            net,
            points: chosen.iter().map(|s| s.x).collect(),
            targets: chosen.iter().map(|s| s.s).collect(),
            reg: regularizer_weight(cfg.sigma, samples.len()),
            loss: cfg.loss,
            chunk_rows: cfg.chunk_rows,
        })
    }

    /// Objective and its gradient with respect to `z`.
    pub fn evaluate(&self, z: &[f64]) -> Result<(f64, Vec<f64>)> {
        let m = self.points.len() as f64;
        let parts: Vec<(f64, Vec<f64>)> = self
            .points
            .par_chunks(self.chunk_rows)
            .zip(self.targets.par_chunks(self.chunk_rows))
            .map(|(pts, targets)| {
                let codes = vec![z; pts.len()];
                let tape = self.net.forward_batch(self.net.assemble_inputs(&codes, pts)?)?;
                let mut loss = 0.0;
                let upstream: Vec<f64> = tape
                    .outputs()
                    .iter()
                    .zip(targets)
                    .map(|(&f, &s)| {
                        let p = point_loss(f, s, &self.loss);
                        loss += p.loss;
                        p.dloss_df / m
                    })
                    .collect();
                let g = self.net.backward(&tape, &upstream, GradientScope::LatentOnly)?;
                let mut grad = vec![0.0; z.len()];
                for r in 0..pts.len() {
                    for (a, v) in grad.iter_mut().zip(g.latent_row(r)) {
                        *a += v;
                    }
                }
                Ok((loss, grad))
            })
            .collect::<Result<_>>()?;
        let mut loss = 0.0;
        let mut grad = vec![0.0; z.len()];
        for (l, g) in parts {
            loss += l;
            for (a, v) in grad.iter_mut().zip(g) {
                *a += v;
            }
        }
        let norm2: f64 = z.iter().map(|v| v * v).sum();
        for (g, &zk) in grad.iter_mut().zip(z) {
            *g += 2.0 * self.reg * zk;
        }
        Ok((loss / m + self.reg * norm2, grad))
    }
}

/// Fits `z` to the observed samples with Adam, keeping the iterate with the
/// lowest objective over all restarts.
pub fn estimate_latent(net: &MlpNetwork, samples: &ShapeSamples, cfg: &InferenceConfig) -> Result<LatentFit> {
    let problem = FitProblem::new(net, samples, cfg)?;
    let hyper = AdamHyper::default();
    let mut best: Option<LatentFit> = None;
    for restart in 0..cfg.restarts {
        let mut z = LatentCode::random(net.latent_dim(), cfg.init_std, &mut rng::stream(cfg.seed, restart as u64))?;
        if cfg.init_std == 0.0 {
            z = LatentCode::zeros(net.latent_dim());
        }
        let mut moments = MomentBuffer::zeros(z.dim());
        let mut run_best = (f64::INFINITY, z.clone());
        let mut history = Vec::with_capacity(cfg.iterations);
        let mut initial = f64::NAN;
        for it in 0..=cfg.iterations {
            let (obj, grad) = problem.evaluate(z.as_slice())?;
            if it == 0 {
                initial = obj;
            }
            if obj < run_best.0 {
                run_best = (obj, z.clone());
            }
            if it == cfg.iterations {
                break;
            }
            history.push(run_best.0);
            let lr = if it >= cfg.lr_decay_at { cfg.lr * cfg.lr_decay } else { cfg.lr };
            adam_step(&mut z.0, &grad, &mut moments, lr, &hyper);
        }
        if best.as_ref().is_none_or(|b| run_best.0 < b.objective) {
            best = Some(LatentFit {
                code: run_best.1,
                objective: run_best.0,
                initial_objective: initial,
                best_history: history,
            });
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Shape completion: the same fit on a partial observation.
pub fn recover_missing_part(net: &MlpNetwork, partial: &ShapeSamples, cfg: &InferenceConfig) -> Result<LatentFit> {
    estimate_latent(net, partial, cfg)
}
