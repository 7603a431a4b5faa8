//! Field sampling on regular grids and zero-level-set extraction.

mod grid;
mod marching_cubes;

pub use grid::ScalarGrid;
pub use marching_cubes::{marching_cubes, triangle_table, WELD_TOLERANCE};

use rayon::prelude::*;

use crate::error::{Result, SdfError};
use crate::geometry::{Aabb, AnalyticShape, TriangleMesh};
use crate::model::{LatentCode, MlpNetwork};

/// Default half-width of the extraction box.
pub const DEFAULT_BOUND: f64 = 1.1;

/// Meshes an analytic shape by sampling its exact SDF.
pub fn mesh_analytic(shape: &AnalyticShape, resolution: usize) -> Result<TriangleMesh> {
    let grid = ScalarGrid::from_fn([resolution; 3], Aabb::cube(DEFAULT_BOUND), |p| shape.signed_distance(p));
    marching_cubes(&grid, 0.0)
}

/// Evaluates `f(z, ·)` at every grid point. Points are processed in fixed
/// blocks in parallel, so the values do not depend on the thread count.
pub fn evaluate_grid(net: &MlpNetwork, z: &LatentCode, resolution: usize, bounds: Aabb) -> Result<ScalarGrid> {
    const BLOCK: usize = 4096;
    if resolution < 2 {
        return Err(SdfError::invalid("grid resolution must be at least 2"));
    }
    let points = ScalarGrid::lattice([resolution; 3], bounds);
    let blocks: Vec<Vec<f64>> = points
        .par_chunks(BLOCK)
        .map(|chunk| net.evaluate(z.as_slice(), chunk))
        .collect::<Result<_>>()?;
    ScalarGrid::new([resolution; 3], bounds, blocks.concat())
}
