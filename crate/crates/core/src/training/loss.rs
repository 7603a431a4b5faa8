//! Per-point losses: clamped L1, the tolerance hinge and the hard-sample
//! reweighting.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SdfError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    pub delta: f64,
    pub epsilon: f64,
    pub lambda: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            delta: 0.1,
            epsilon: 0.0,
            lambda: 0.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(SdfError::invalid(format!("delta {} must be positive", self.delta)));
        }
        if !(self.epsilon >= 0.0) {
            return Err(SdfError::invalid(format!("epsilon {} must be non-negative", self.epsilon)));
        }
        if !(0.0..1.0).contains(&self.lambda) {
            return Err(SdfError::invalid(format!("lambda {} must lie in [0, 1)", self.lambda)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Difficulty {
    Hard,
    SemiHard,
    Easy,
}

/// `sgn(v) = 1` for `v ≥ 0`, else `−1`.
#[inline]
pub fn sgn(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

#[inline]
pub fn clamp(s: f64, delta: f64) -> f64 {
    delta.min((-delta).max(s))
}

pub fn loss_deepsdf(f: f64, s: f64, delta: f64) -> f64 {
    (clamp(f, delta) - clamp(s, delta)).abs()
}

pub fn loss_tolerance(f: f64, s: f64, delta: f64, epsilon: f64) -> f64 {
    (loss_deepsdf(f, s, delta) - epsilon).max(0.0)
}

/// Sign mismatch is hard; same sign but smaller magnitude than the target is
/// semi-hard; anything else is easy. Inputs are clamped values.
pub fn classify_sample(f_clamped: f64, s_clamped: f64) -> Difficulty {
    if sgn(f_clamped) != sgn(s_clamped) {
        Difficulty::Hard
    } else if f_clamped.abs() < s_clamped.abs() {
        Difficulty::SemiHard
    } else {
        Difficulty::Easy
    }
}

/// `1 + λ·sgn(s̄)·sgn(s̄ − f̄)`.
pub fn weight_factor(f_clamped: f64, s_clamped: f64, lambda: f64) -> f64 {
    1.0 + lambda * sgn(s_clamped) * sgn(s_clamped - f_clamped)
}

pub fn loss_curriculum(f: f64, s: f64, cfg: &LossConfig) -> f64 {
    let (fc, sc) = (clamp(f, cfg.delta), clamp(s, cfg.delta));
    weight_factor(fc, sc, cfg.lambda) * loss_tolerance(f, s, cfg.delta, cfg.epsilon)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointLoss {
    pub loss: f64,
    /// `∂loss/∂f`, with the weight factor held constant and 0 at kinks.
    pub dloss_df: f64,
    pub difficulty: Difficulty,
}

pub fn point_loss(f: f64, s: f64, cfg: &LossConfig) -> PointLoss {
    let (fc, sc) = (clamp(f, cfg.delta), clamp(s, cfg.delta));
    let d = fc - sc;
    let w = weight_factor(fc, sc, cfg.lambda);
    let excess = d.abs() - cfg.epsilon;
    let (loss, dloss_df) = if excess > 0.0 {
        let inside_clamp = f.abs() < cfg.delta;
        (w * excess, if inside_clamp { w * d.signum() } else { 0.0 })
    } else {
        (0.0, 0.0)
    };
    PointLoss {
        loss,
        dloss_df,
        difficulty: classify_sample(fc, sc),
    }
}
