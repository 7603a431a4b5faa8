//! Meshes, analytic shapes and their signed distance oracles.

mod analytic;
mod bvh;
mod distance;
pub mod io;
mod mesh;
mod sampling;

pub use analytic::AnalyticShape;
pub use bvh::{Bvh, ClosestHit, Feature};
pub use distance::MeshSdf;
pub use mesh::{TriangleMesh, DEGENERATE_AREA};
pub use sampling::surface_sample;

/// A point or direction in object space.
pub type Point3 = nalgebra::Vector3<f64>;

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Point3::repeat(f64::INFINITY),
            max: Point3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn cube(half: f64) -> Self {
        Aabb {
            min: Point3::repeat(-half),
            max: Point3::repeat(half),
        }
    }

    pub fn grow(&mut self, p: &Point3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn extent(&self) -> Point3 {
        self.max - self.min
    }

    pub fn center(&self) -> Point3 {
        (self.min + self.max) * 0.5
    }

    /// Squared distance from `p` to the box (0 inside).
    pub fn distance_squared(&self, p: &Point3) -> f64 {
        let mut d2 = 0.0;
        for k in 0..3 {
            let v = p[k];
            let e = if v < self.min[k] {
                self.min[k] - v
            } else if v > self.max[k] {
                v - self.max[k]
            } else {
                0.0
            };
            d2 += e * e;
        }
        d2
    }
}

pub(crate) fn is_finite(p: &Point3) -> bool {
    p.iter().all(|c| c.is_finite())
}
