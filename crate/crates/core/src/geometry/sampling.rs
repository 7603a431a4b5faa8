use rand::Rng;

use super::{Point3, TriangleMesh};
use crate::error::{Result, SdfError};
use crate::rng;

/// Area-uniform random points on the mesh surface.
///
/// A triangle is picked with probability proportional to its area, then a
/// point is drawn uniformly inside it with the square-root barycentric map.
pub fn surface_sample(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<Vec<Point3>> {
    if mesh.is_empty() {
        return Err(SdfError::invalid("cannot sample an empty mesh"));
    }
    if n == 0 {
        return Err(SdfError::invalid("sample count must be at least 1"));
    }
    let mut cumulative = Vec::with_capacity(mesh.triangles().len());
    let mut total = 0.0;
    for t in 0..mesh.triangles().len() {
        total += mesh.area(t);
        cumulative.push(total);
    }
    let mut rng = rng::seeded(seed);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let u = rng.random::<f64>() * total;
        let t = cumulative
            .partition_point(|&c| c <= u)
            .min(cumulative.len() - 1);
        let [a, b, c] = mesh.corners(t);
        let r1: f64 = rng.random::<f64>().sqrt();
        let r2: f64 = rng.random();
        points.push(a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2));
    }
    Ok(points)
}
