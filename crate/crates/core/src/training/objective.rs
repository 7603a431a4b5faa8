use rayon::prelude::*;

use super::loss::{point_loss, Difficulty, LossConfig};
use super::LatentBank;
use crate::error::{Result, SdfError};
use crate::geometry::Point3;
use crate::model::{GradientBundle, GradientScope, Layer, MlpNetwork};

/// One training point of a batch, tagged with its shape's index in the
/// latent bank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchRow {
    pub shape: usize,
    pub x: Point3,
    pub s: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BatchStats {
    pub rows: usize,
    /// Sum of per-point curriculum losses (without the regulariser).
    pub loss_sum: f64,
    pub reg_sum: f64,
    pub hard: usize,
    pub semi_hard: usize,
    pub easy: usize,
}

impl BatchStats {
    pub fn merge(&mut self, other: &BatchStats) {
        self.rows += other.rows;
        self.loss_sum += other.loss_sum;
        self.reg_sum += other.reg_sum;
        self.hard += other.hard;
        self.semi_hard += other.semi_hard;
        self.easy += other.easy;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchGradients {
    /// Network gradients, or `None` when only latents were requested.
    pub hidden: Vec<Layer>,
    pub output: Option<Layer>,
    /// `(shape index, ∂J/∂z)` for every shape in the batch, by shape index.
    pub latents: Vec<(usize, Vec<f64>)>,
}

/// Per-point regulariser weight `1/(σ²K)`: summed over a shape's `K` samples
/// it gives the full `‖z‖²/σ²` term.
pub fn regularizer_weight(sigma: f64, samples_per_shape: usize) -> f64 {
    1.0 / (sigma * sigma * samples_per_shape as f64)
}

/// Mean over the batch of `L(f(z_i, x), s) + c_i‖z_i‖²` and its gradients.
///
/// `reg_weights[i]` is `c_i` for shape `i` of the bank. Rows are processed in
/// fixed-size chunks in parallel and reduced in order, so the result does not
/// depend on the thread count.
pub fn objective_batch(
    net: &MlpNetwork,
    bank: &LatentBank,
    rows: &[BatchRow],
    loss: &LossConfig,
    reg_weights: &[f64],
    scope: GradientScope,
    chunk_rows: usize,
) -> Result<(f64, BatchStats, BatchGradients)> {
    if rows.is_empty() {
        return Err(SdfError::invalid("empty batch"));
    }
    if reg_weights.len() != bank.len() {
        return Err(SdfError::DimensionMismatch {
            expected: bank.len(),
            actual: reg_weights.len(),
        });
    }
    if let Some(bad) = rows.iter().find(|r| r.shape >= bank.len()) {
        return Err(SdfError::UnknownShape(format!("index {}", bad.shape)));
    }
    let b = rows.len() as f64;
    let chunks: Vec<(BatchStats, GradientBundle)> = rows
        .par_chunks(chunk_rows.max(1))
        .map(|chunk| chunk_gradients(net, bank, chunk, loss, b, scope))
        .collect::<Result<_>>()?;

    let mut stats = BatchStats::default();
    let mut hidden: Vec<Layer> = Vec::new();
    let mut output: Option<Layer> = None;
    let dim = net.latent_dim();
    let mut latent_sum: Vec<Option<Vec<f64>>> = vec![None; bank.len()];
    let mut offset = 0;
    for (chunk_stats, g) in &chunks {
        stats.merge(chunk_stats);
        if scope == GradientScope::Full {
            if hidden.is_empty() {
                hidden = g.hidden.clone();
                output = g.output.clone();
            } else {
                for (acc, l) in hidden.iter_mut().zip(&g.hidden) {
                    add_layer(acc, l);
                }
                add_layer(output.as_mut().unwrap(), g.output.as_ref().unwrap());
            }
        }
        for r in 0..chunk_stats.rows {
            let shape = rows[offset + r].shape;
            let acc = latent_sum[shape].get_or_insert_with(|| vec![0.0; dim]);
            for (a, v) in acc.iter_mut().zip(g.latent_row(r)) {
                *a += v;
            }
        }
        offset += chunk_stats.rows;
    }

    let mut counts = vec![0usize; bank.len()];
    for r in rows {
        counts[r.shape] += 1;
    }
    let mut latents = Vec::new();
    for (i, grad) in latent_sum.into_iter().enumerate() {
        let Some(mut grad) = grad else { continue };
        let z = bank.code(i).as_slice();
        let share = counts[i] as f64 / b;
        let c = reg_weights[i];
        stats.reg_sum += counts[i] as f64 * c * bank.code(i).norm_squared();
        for (g, &zk) in grad.iter_mut().zip(z) {
            *g += share * 2.0 * c * zk;
        }
        latents.push((i, grad));
    }
    let objective = (stats.loss_sum + stats.reg_sum) / b;
    Ok((objective, stats, BatchGradients { hidden, output, latents }))
}

fn chunk_gradients(
    net: &MlpNetwork,
    bank: &LatentBank,
    chunk: &[BatchRow],
    loss: &LossConfig,
    batch_rows: f64,
    scope: GradientScope,
) -> Result<(BatchStats, GradientBundle)> {
    let codes: Vec<&[f64]> = chunk.iter().map(|r| bank.code(r.shape).as_slice()).collect();
    let points: Vec<Point3> = chunk.iter().map(|r| r.x).collect();
    let tape = net.forward_batch(net.assemble_inputs(&codes, &points)?)?;
    let mut stats = BatchStats {
        rows: chunk.len(),
        ..BatchStats::default()
    };
    let upstream: Vec<f64> = chunk
        .iter()
        .zip(tape.outputs())
        .map(|(r, &f)| {
            let p = point_loss(f, r.s, loss);
            stats.loss_sum += p.loss;
            match p.difficulty {
                Difficulty::Hard => stats.hard += 1,
                Difficulty::SemiHard => stats.semi_hard += 1,
                Difficulty::Easy => stats.easy += 1,
            }
            p.dloss_df / batch_rows
        })
        .collect();
    let grads = net.backward(&tape, &upstream, scope)?;
    Ok((stats, grads))
}

fn add_layer(acc: &mut Layer, other: &Layer) {
    for (a, b) in acc.weight.iter_mut().zip(&other.weight) {
        *a += b;
    }
    for (a, b) in acc.bias.iter_mut().zip(&other.bias) {
        *a += b;
    }
}
