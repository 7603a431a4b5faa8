//! Losses, the curriculum schedule, optimisers and the epoch loop.

mod checkpoint;
mod latent;
pub mod loss;
mod objective;
pub mod optim;
mod schedule;
mod trainer;

pub use checkpoint::{read_state, CheckpointState, CHECKPOINT_VERSION};
pub use latent::LatentBank;
pub use loss::{Difficulty, LossConfig};
pub use objective::{objective_batch, regularizer_weight, BatchGradients, BatchRow, BatchStats};
pub use optim::{adam_step, AdamHyper, MomentBuffer, OptimizerKind};
pub use schedule::{CurriculumSchedule, CurriculumStage};
pub use trainer::{LogRow, Trainer, LOG_HEADER};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SdfError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub shapes_per_step: usize,
    pub points_per_shape: usize,
    /// Shuffled passes over the shape list per epoch.
    pub passes_per_epoch: usize,
    /// Adam step size for the network weights.
    pub lr_network: f64,
    pub lr_latent: f64,
    pub sigma: f64,
    pub delta: f64,
    pub latent_init_std: f64,
    pub optimizer: OptimizerKind,
    pub adam: AdamHyper,
    pub seed: u64,
    /// Rows per forward/backward chunk; chunks run in parallel.
    pub chunk_rows: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            shapes_per_step: 8,
            points_per_shape: 512,
            passes_per_epoch: 16,
            lr_network: 5e-4,
            lr_latent: 1e-3,
            sigma: 1e-2,
            delta: 0.1,
            latent_init_std: 0.01,
            optimizer: OptimizerKind::Adam,
            adam: AdamHyper::default(),
            seed: 0,
            chunk_rows: 1024,
        }
    }
}

impl TrainConfig {
    pub fn points_per_step(&self) -> usize {
        self.shapes_per_step * self.points_per_shape
    }

    pub fn validate(&self) -> Result<()> {
        if self.shapes_per_step == 0 || self.points_per_shape == 0 || self.passes_per_epoch == 0 || self.chunk_rows == 0 {
            return Err(SdfError::invalid("batch sizes and passes must be at least 1"));
        }
        for (name, v) in [
            ("lr_network", self.lr_network),
            ("lr_latent", self.lr_latent),
            ("sigma", self.sigma),
            ("delta", self.delta),
            ("latent_init_std", self.latent_init_std),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SdfError::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}
