use rayon::prelude::*;

use crate::error::{Result, SdfError};
use crate::geometry::{Aabb, Point3};

/// Regular sampling of a scalar field; `values` are x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    resolution: [usize; 3],
    bounds: Aabb,
    values: Vec<f64>,
}

impl ScalarGrid {
    pub fn new(resolution: [usize; 3], bounds: Aabb, values: Vec<f64>) -> Result<Self> {
        if resolution.iter().any(|&r| r < 2) {
            return Err(SdfError::invalid("grid resolution must be at least 2 per axis"));
        }
        let expected = resolution.iter().product::<usize>();
        if values.len() != expected {
            return Err(SdfError::DimensionMismatch {
                expected,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SdfError::invalid("grid contains non-finite values"));
        }
        Ok(ScalarGrid {
            resolution,
            bounds,
            values,
        })
    }

    /// Samples `f` at every grid point, in parallel over z-slabs.
    pub fn from_fn(resolution: [usize; 3], bounds: Aabb, f: impl Fn(&Point3) -> f64 + Sync) -> Self {
        let [nx, ny, nz] = resolution;
        let proto = ScalarGrid {
            resolution,
            bounds,
            values: Vec::new(),
        };
        let values: Vec<f64> = (0..nz)
            .into_par_iter()
            .flat_map_iter(|k| {
                let proto = &proto;
                let f = &f;
                (0..ny).flat_map(move |j| (0..nx).map(move |i| f(&proto.point(i, j, k))))
            })
            .collect();
        ScalarGrid { values, ..proto }
    }

    pub fn resolution(&self) -> [usize; 3] {
        self.resolution
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        let [nx, ny, _] = self.resolution;
        self.values[i + nx * (j + ny * k)]
    }

    pub fn cell_size(&self) -> Point3 {
        let ext = self.bounds.extent();
        Point3::new(
            ext.x / (self.resolution[0] - 1) as f64,
            ext.y / (self.resolution[1] - 1) as f64,
            ext.z / (self.resolution[2] - 1) as f64,
        )
    }

    pub fn point(&self, i: usize, j: usize, k: usize) -> Point3 {
        let idx = [i, j, k];
        let mut p = Point3::zeros();
        for d in 0..3 {
            let t = idx[d] as f64 / (self.resolution[d] - 1) as f64;
            p[d] = self.bounds.min[d] + t * (self.bounds.max[d] - self.bounds.min[d]);
        }
        p
    }

    /// All grid points in storage order.
    pub fn points(&self) -> Vec<Point3> {
        Self::lattice(self.resolution, self.bounds)
    }

    /// Points of a grid with the given resolution and bounds, x-fastest.
    pub fn lattice(resolution: [usize; 3], bounds: Aabb) -> Vec<Point3> {
        let [nx, ny, nz] = resolution;
        let shell = ScalarGrid {
            resolution,
            bounds,
            values: Vec::new(),
        };
        let mut pts = Vec::with_capacity(nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    pts.push(shell.point(i, j, k));
                }
            }
        }
        pts
    }
}
