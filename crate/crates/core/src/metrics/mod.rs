//! Point-set and surface metrics: Chamfer distance, Earth Mover's distance
//! by exact assignment, and mesh accuracy.

mod assignment;
mod kdtree;

pub use kdtree::KdTree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdfError};
use crate::geometry::{surface_sample, MeshSdf, Point3, TriangleMesh};

/// Whether Chamfer terms use squared or plain nearest-neighbour distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChamferMode {
    Squared,
    Absolute,
}

fn check_points(name: &str, pts: &[Point3]) -> Result<()> {
    if pts.is_empty() {
        return Err(SdfError::invalid(format!("{name} point set is empty")));
    }
    if pts.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(SdfError::invalid(format!("{name} point set has non-finite coordinates")));
    }
    Ok(())
}

/// Mean over `from` of the nearest-neighbour distance into `to`.
fn directed_mean(from: &[Point3], to: &KdTree, mode: ChamferMode) -> f64 {
    let dists: Vec<f64> = from
        .par_iter()
        .map(|p| {
            let d2 = to.nearest_distance_squared(p);
            match mode {
                ChamferMode::Squared => d2,
                ChamferMode::Absolute => d2.sqrt(),
            }
        })
        .collect();
    dists.iter().sum::<f64>() / from.len() as f64
}

/// Sum of the two directional mean squared nearest-neighbour distances.
pub fn chamfer(a: &[Point3], b: &[Point3]) -> Result<f64> {
    chamfer_with(a, b, ChamferMode::Squared)
}

pub fn chamfer_with(a: &[Point3], b: &[Point3], mode: ChamferMode) -> Result<f64> {
    check_points("first", a)?;
    check_points("second", b)?;
    let (ta, tb) = (KdTree::new(a), KdTree::new(b));
    Ok(directed_mean(a, &tb, mode) + directed_mean(b, &ta, mode))
}

/// Minimum over perfect matchings of the mean matched Euclidean distance.
pub fn emd(a: &[Point3], b: &[Point3]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(SdfError::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    check_points("first", a)?;
    check_points("second", b)?;
    let col = assignment::solve(a.len(), |i, j| (a[i] - b[j]).norm());
    Ok(matching_cost(a, b, &col))
}

/// Mean of `‖a_i − b_{col[i]}‖`, summed in row order.
pub fn matching_cost(a: &[Point3], b: &[Point3], col: &[usize]) -> f64 {
    col.iter().enumerate().map(|(i, &j)| (a[i] - b[j]).norm()).sum::<f64>() / a.len() as f64
}

/// Nearest-rank percentile: the `⌈q·n⌉`-th smallest value.
pub fn nearest_rank(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let rank = ((q * values.len() as f64).ceil() as usize).clamp(1, values.len());
    values[rank - 1]
}

/// Smallest `d` such that 90% of `pred` lies within `d` of the mesh.
pub fn mesh_accuracy(pred: &[Point3], gt: &TriangleMesh) -> Result<f64> {
    if pred.len() < 10 {
        return Err(SdfError::invalid(format!("mesh accuracy needs at least 10 points, got {}", pred.len())));
    }
    if gt.is_empty() {
        return Err(SdfError::invalid("ground-truth mesh is empty"));
    }
    let sdf = MeshSdf::new_unsigned(gt.clone());
    let mut d: Vec<f64> = pred.par_iter().map(|p| sdf.unsigned_distance(p)).collect();
    Ok(nearest_rank(&mut d, 0.9))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricProtocol {
    pub cd_points: usize,
    pub emd_points: usize,
    pub accuracy_points: usize,
    pub chamfer_mode: ChamferMode,
    pub pred_seed: u64,
    pub gt_seed: u64,
}

impl Default for MetricProtocol {
    fn default() -> Self {
        MetricProtocol {
            cd_points: 30_000,
            emd_points: 500,
            accuracy_points: 1000,
            chamfer_mode: ChamferMode::Squared,
            pred_seed: 0,
            gt_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub shape_id: String,
    pub cd_mean_raw: f64,
    pub cd_x1000: f64,
    pub emd: f64,
    pub mesh_acc_raw: f64,
    pub mesh_acc_x10: f64,
    pub pred_seed: u64,
    pub gt_seed: u64,
    pub cd_points: usize,
    pub emd_points: usize,
    pub accuracy_points: usize,
}

/// Samples both surfaces per the protocol and computes CD, EMD and mesh
/// accuracy. Each metric uses its own sample draw, derived from the
/// protocol seeds.
pub fn evaluate_reconstruction(shape_id: &str, pred: &TriangleMesh, gt: &TriangleMesh, protocol: &MetricProtocol) -> Result<MetricRecord> {
    if pred.is_empty() {
        return Err(SdfError::invalid(format!("prediction for `{shape_id}` is an empty mesh")));
    }
    let draw = |mesh: &TriangleMesh, n: usize, seed: u64, salt: u64| surface_sample(mesh, n, crate::rng::mix(seed, salt));
    let cd = chamfer_with(
        &draw(pred, protocol.cd_points, protocol.pred_seed, 1)?,
        &draw(gt, protocol.cd_points, protocol.gt_seed, 1)?,
        protocol.chamfer_mode,
    )?;
    let emd_value = emd(
        &draw(pred, protocol.emd_points, protocol.pred_seed, 2)?,
        &draw(gt, protocol.emd_points, protocol.gt_seed, 2)?,
    )?;
    let acc = mesh_accuracy(&draw(pred, protocol.accuracy_points, protocol.pred_seed, 3)?, gt)?;
    Ok(MetricRecord {
        shape_id: shape_id.to_owned(),
        cd_mean_raw: cd,
        cd_x1000: cd * 1e3,
        emd: emd_value,
        mesh_acc_raw: acc,
        mesh_acc_x10: acc * 10.0,
        pred_seed: protocol.pred_seed,
        gt_seed: protocol.gt_seed,
        cd_points: protocol.cd_points,
        emd_points: protocol.emd_points,
        accuracy_points: protocol.accuracy_points,
    })
}

/// Mean and median of a metric over shapes.
pub fn mean_and_median(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    Some((mean, median))
}
