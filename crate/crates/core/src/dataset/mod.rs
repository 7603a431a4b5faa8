//! Near-surface biased `(x, s)` training samples, their file format and the
//! local part removal used for shape completion.

mod io;
mod manifest;

pub use io::{load_samples, parse_samples, save_samples, write_samples_text, MAGIC};
pub use manifest::{DatasetManifest, ShapeEntry, Split};

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal, UnitBall};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use crate::error::{Result, SdfError};
use crate::extraction;
use crate::geometry::{surface_sample, AnalyticShape, MeshSdf, Point3, TriangleMesh};
use crate::rng;

/// Samples farther than this from the origin are redrawn.
pub const MAX_SAMPLE_RADIUS: f64 = 1.2;
/// Radius of the ball the uniform share is drawn from.
pub const UNIFORM_RADIUS: f64 = 1.1;
/// Marching-cubes resolution used to obtain surface points of analytic shapes.
pub const ANALYTIC_SURFACE_RESOLUTION: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdfSample {
    pub x: Point3,
    pub s: f64,
}

/// Where a sample set came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ShapeSource {
    Analytic { shape: AnalyticShape },
    Mesh { path: PathBuf },
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSamples {
    pub shape_id: String,
    pub samples: Vec<SdfSample>,
    pub source: ShapeSource,
}

impl ShapeSamples {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    /// Samples per shape (`K`).
    pub count: usize,
    pub near_fraction_1: f64,
    pub noise_std_1: f64,
    pub near_fraction_2: f64,
    pub noise_std_2: f64,
    pub uniform_fraction: f64,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            count: 20_000,
            near_fraction_1: 0.45,
            noise_std_1: 0.05,
            near_fraction_2: 0.45,
            noise_std_2: 0.005,
            uniform_fraction: 0.10,
            seed: 0,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        let fractions = [self.near_fraction_1, self.near_fraction_2, self.uniform_fraction];
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(SdfError::invalid("sampling fractions must lie in [0, 1]"));
        }
        if (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(SdfError::invalid("sampling fractions must sum to 1"));
        }
        if !(self.noise_std_1 > 0.0 && self.noise_std_2 > 0.0) {
            return Err(SdfError::invalid("noise standard deviations must be positive"));
        }
        if self.count == 0 {
            return Err(SdfError::invalid("sample count must be at least 1"));
        }
        Ok(())
    }

    /// Sizes of the (near 1, near 2, uniform) groups; the uniform group
    /// absorbs rounding.
    pub fn group_sizes(&self) -> [usize; 3] {
        let k = self.count as f64;
        let n1 = ((self.near_fraction_1 * k).round() as usize).min(self.count);
        let n2 = ((self.near_fraction_2 * k).round() as usize).min(self.count - n1);
        [n1, n2, self.count - n1 - n2]
    }
}

/// Ground-truth signed distance for sample generation.
#[derive(Debug, Clone)]
pub enum SdfOracle {
    Analytic(AnalyticShape),
    Mesh(MeshSdf),
}

impl SdfOracle {
    pub fn signed_distance(&self, p: &Point3) -> f64 {
        match self {
            SdfOracle::Analytic(shape) => shape.signed_distance(p),
            SdfOracle::Mesh(sdf) => sdf.signed_distance(p),
        }
    }

    /// A surface mesh: the mesh itself, or marching cubes for analytic shapes.
    pub fn surface(&self) -> Result<TriangleMesh> {
        match self {
            SdfOracle::Analytic(shape) => extraction::mesh_analytic(shape, ANALYTIC_SURFACE_RESOLUTION),
            SdfOracle::Mesh(sdf) => Ok(sdf.mesh().clone()),
        }
    }
}

/// Draws `cfg.count` samples around the surface of a shape that lies within
/// the unit sphere. Coordinates are rounded to `f32` before labelling so the
/// stored points are exactly representable in the sample file.
pub fn generate_samples(shape_id: &str, oracle: &SdfOracle, source: ShapeSource, cfg: &SamplingConfig) -> Result<ShapeSamples> {
    cfg.validate()?;
    if let SdfOracle::Analytic(shape) = oracle {
        shape.validate()?;
        if shape.bounding_radius() > 1.0 + 1e-9 {
            return Err(SdfError::invalid(format!(
                "shape `{shape_id}` extends beyond the unit sphere (radius {})",
                shape.bounding_radius()
            )));
        }
    }
    let [n1, n2, n3] = cfg.group_sizes();
    let surface = oracle.surface()?;
    let anchors = surface_sample(&surface, n1 + n2, rng::mix(cfg.seed, 1))?;
    let mut rng = rng::stream(cfg.seed, 2);
    let noise = [
        Normal::new(0.0, cfg.noise_std_1).map_err(|e| SdfError::invalid(e.to_string()))?,
        Normal::new(0.0, cfg.noise_std_2).map_err(|e| SdfError::invalid(e.to_string()))?,
    ];
    let quantize = |p: Point3| p.map(|c| c as f32 as f64);
    let mut points = Vec::with_capacity(cfg.count);
    for (k, anchor) in anchors.iter().enumerate() {
        let dist = &noise[usize::from(k >= n1)];
        loop {
            let offset = Point3::new(dist.sample(&mut rng), dist.sample(&mut rng), dist.sample(&mut rng));
            let x = quantize(anchor + offset);
            if x.norm() <= MAX_SAMPLE_RADIUS {
                points.push(x);
                break;
            }
        }
    }
    for _ in 0..n3 {
        let u: [f64; 3] = UnitBall.sample(&mut rng);
        points.push(quantize(Point3::from(u) * UNIFORM_RADIUS));
    }
    let samples = points
        .into_iter()
        .map(|x| SdfSample {
            x,
            s: oracle.signed_distance(&x),
        })
        .collect::<Vec<_>>();
    if samples.iter().any(|s| !s.s.is_finite()) {
        return Err(SdfError::invalid(format!("non-finite distance for `{shape_id}`")));
    }
    Ok(ShapeSamples {
        shape_id: shape_id.to_owned(),
        samples,
        source,
    })
}

/// Removes the `⌈ratio·K⌉` samples nearest to a uniformly chosen seed sample
/// (the seed included). Returns the remainder in original order.
pub fn remove_local_part(samples: &ShapeSamples, ratio: f64, seed: u64) -> Result<ShapeSamples> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(SdfError::invalid(format!("removal ratio {ratio} must lie in (0, 1)")));
    }
    if samples.is_empty() {
        return Err(SdfError::invalid("cannot remove from an empty sample set"));
    }
    let removed = removal_set(samples, ratio, seed);
    let mut keep = vec![true; samples.len()];
    for i in removed {
        keep[i] = false;
    }
    Ok(ShapeSamples {
        shape_id: samples.shape_id.clone(),
        samples: samples
            .samples
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(s, _)| *s)
            .collect(),
        source: samples.source.clone(),
    })
}

/// Indices removed by [`remove_local_part`], nearest first.
pub fn removal_set(samples: &ShapeSamples, ratio: f64, seed: u64) -> Vec<usize> {
    let n = samples.len();
    let k = ((ratio * n as f64).ceil() as usize).clamp(1, n);
    let centre_idx = rng::seeded(seed).random_range(0..n);
    let centre = samples.samples[centre_idx].x;
    let mut order: Vec<(f64, usize)> = samples
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| ((s.x - centre).norm_squared(), i))
        .collect();
    // The seed itself is at distance 0; ties break by index, so force it first.
    order[centre_idx].0 = -1.0;
    order.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order.truncate(k);
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order.into_iter().map(|(_, i)| i).collect()
}

/// Draws `n` distinct sample indices (or all of them when `n ≥ len`) in
/// ascending order.
pub fn subset_indices(len: usize, n: usize, seed: u64) -> Vec<usize> {
    if n >= len {
        return (0..len).collect();
    }
    let mut idx = index::sample(&mut rng::seeded(seed), len, n).into_vec();
    idx.sort_unstable();
    idx
}
