//! The auto-decoder `f(z, x)` with hand-derived back-propagation and
//! progressive growth.

mod network;

pub use network::{GradientBundle, GradientScope, GrowthState, Layer, MlpNetwork, NetworkConfig, Tape};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdfError};
use crate::rng::Rng;

/// Per-shape latent vector `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentCode(pub Vec<f64>);

impl LatentCode {
    pub fn zeros(dim: usize) -> Self {
        LatentCode(vec![0.0; dim])
    }

    /// Entries drawn from `N(0, std²)`.
    pub fn random(dim: usize, std: f64, rng: &mut Rng) -> Result<Self> {
        let normal = Normal::new(0.0, std).map_err(|e| SdfError::invalid(format!("latent std {std}: {e}")))?;
        Ok(LatentCode((0..dim).map(|_| normal.sample(rng)).collect()))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }
}
