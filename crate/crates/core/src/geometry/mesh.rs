use std::collections::HashMap;

use super::{is_finite, Aabb, Point3};
use crate::error::{Result, SdfError};

/// Triangles with area below this are dropped at construction.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Indexed triangle surface.
///
/// Construction validates indices and finiteness and silently repairs only
/// one thing: zero-area triangles are dropped (with a warning), since they
/// have no normal and would corrupt pseudonormals downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if let Some(i) = vertices.iter().position(|v| !is_finite(v)) {
            return Err(SdfError::invalid(format!("vertex {i} is not finite")));
        }
        let n = vertices.len();
        let mut kept = Vec::with_capacity(triangles.len());
        let mut dropped = 0usize;
        for (t, tri) in triangles.into_iter().enumerate() {
            if tri.iter().any(|&i| i as usize >= n) {
                return Err(SdfError::invalid(format!(
                    "triangle {t} references a vertex out of range ({n} vertices)"
                )));
            }
            if triangle_area(&vertices, &tri) < DEGENERATE_AREA {
                dropped += 1;
            } else {
                kept.push(tri);
            }
        }
        if dropped > 0 {
            log::warn!("dropped {dropped} degenerate triangle(s) with area < {DEGENERATE_AREA:e}");
        }
        Ok(TriangleMesh {
            vertices,
            triangles: kept,
        })
    }

    pub fn empty() -> Self {
        TriangleMesh {
            vertices: Vec::new(),
            triangles: Vec::new(),
        }
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn corners(&self, t: usize) -> [Point3; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn area(&self, t: usize) -> f64 {
        triangle_area(&self.vertices, &self.triangles[t])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.area(t)).sum()
    }

    /// Unit normal of triangle `t` following its winding.
    pub fn face_normal(&self, t: usize) -> Point3 {
        let [a, b, c] = self.corners(t);
        (b - a).cross(&(c - a)).normalize()
    }

    pub fn bounds(&self) -> Aabb {
        let mut bb = Aabb::empty();
        for v in &self.vertices {
            bb.grow(v);
        }
        bb
    }

    /// True iff every edge is used by exactly two triangles traversing it in
    /// opposite directions.
    pub fn is_watertight(&self) -> bool {
        if self.triangles.is_empty() {
            return false;
        }
        let mut directed: HashMap<(u32, u32), u32> = HashMap::with_capacity(self.triangles.len() * 3);
        for tri in &self.triangles {
            for k in 0..3 {
                let e = (tri[k], tri[(k + 1) % 3]);
                *directed.entry(e).or_insert(0) += 1;
            }
        }
        directed
            .iter()
            .all(|(&(a, b), &count)| count == 1 && directed.get(&(b, a)) == Some(&1))
    }

    /// Same geometry with every triangle's winding reversed.
    pub fn flipped(&self) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.clone(),
            triangles: self.triangles.iter().map(|&[a, b, c]| [a, c, b]).collect(),
        }
    }

    /// Applies `f` to every vertex.
    pub fn map_vertices(&self, f: impl Fn(&Point3) -> Point3) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(f).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Centers the mesh at its vertex centroid and scales it so the farthest
    /// vertex lies at distance 1.
    ///
    /// Returns `(normalized, scale, offset)` with
    /// `normalized = (v - offset) / scale`, i.e. `v = normalized * scale + offset`.
    pub fn normalize_to_unit_sphere(&self) -> Result<(TriangleMesh, f64, Point3)> {
        if self.triangles.is_empty() {
            return Err(SdfError::invalid("cannot normalize an empty mesh"));
        }
        let used = self.used_vertices();
        let centroid = used.iter().fold(Point3::zeros(), |acc, &i| acc + self.vertices[i])
            / used.len() as f64;
        let scale = used
            .iter()
            .map(|&i| (self.vertices[i] - centroid).norm())
            .fold(0.0, f64::max);
        if !(scale > 0.0) {
            return Err(SdfError::invalid("mesh has zero extent"));
        }
        let normalized = self.map_vertices(|v| (v - centroid) / scale);
        Ok((normalized, scale, centroid))
    }

    fn used_vertices(&self) -> Vec<usize> {
        let mut used = vec![false; self.vertices.len()];
        for tri in &self.triangles {
            for &i in tri {
                used[i as usize] = true;
            }
        }
        (0..self.vertices.len()).filter(|&i| used[i]).collect()
    }

    /// Merges vertices closer than `tolerance` (grid-hashed) and drops
    /// triangles that collapse.
    pub fn welded(&self, tolerance: f64) -> Result<TriangleMesh> {
        let mut cells: HashMap<[i64; 3], u32> = HashMap::with_capacity(self.vertices.len());
        let mut remap = Vec::with_capacity(self.vertices.len());
        let mut vertices = Vec::new();
        for v in &self.vertices {
            let key = [
                (v.x / tolerance).round() as i64,
                (v.y / tolerance).round() as i64,
                (v.z / tolerance).round() as i64,
            ];
            let id = *cells.entry(key).or_insert_with(|| {
                vertices.push(*v);
                (vertices.len() - 1) as u32
            });
            remap.push(id);
        }
        let triangles = self
            .triangles
            .iter()
            .map(|t| [remap[t[0] as usize], remap[t[1] as usize], remap[t[2] as usize]])
            .filter(|t| t[0] != t[1] && t[1] != t[2] && t[0] != t[2])
            .collect();
        TriangleMesh::new(vertices, triangles)
    }

    /// Icosahedron refined `subdivisions` times and projected onto a sphere.
    pub fn icosphere(center: Point3, radius: f64, subdivisions: u32) -> TriangleMesh {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let mut vertices: Vec<Point3> = [
            (-1.0, phi, 0.0),
            (1.0, phi, 0.0),
            (-1.0, -phi, 0.0),
            (1.0, -phi, 0.0),
            (0.0, -1.0, phi),
            (0.0, 1.0, phi),
            (0.0, -1.0, -phi),
            (0.0, 1.0, -phi),
            (phi, 0.0, -1.0),
            (phi, 0.0, 1.0),
            (-phi, 0.0, -1.0),
            (-phi, 0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y, z)| Point3::new(x, y, z).normalize())
        .collect();
        let mut faces: Vec<[u32; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
            let mut midpoint = |a: u32, b: u32, vertices: &mut Vec<Point3>| -> u32 {
                let key = (a.min(b), a.max(b));
                *midpoints.entry(key).or_insert_with(|| {
                    let m = ((vertices[a as usize] + vertices[b as usize]) * 0.5).normalize();
                    vertices.push(m);
                    (vertices.len() - 1) as u32
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for &[a, b, c] in &faces {
                let ab = midpoint(a, b, &mut vertices);
                let bc = midpoint(b, c, &mut vertices);
                let ca = midpoint(c, a, &mut vertices);
                next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        let vertices = vertices.into_iter().map(|v| center + v * radius).collect();
        TriangleMesh {
            vertices,
            triangles: faces,
        }
    }

    /// Axis-aligned box with outward-facing triangles.
    pub fn cuboid(center: Point3, half_extents: Point3) -> TriangleMesh {
        let mut vertices = Vec::with_capacity(8);
        for i in 0..8u32 {
            let s = Point3::new(
                if i & 1 == 0 { -1.0 } else { 1.0 },
                if i & 2 == 0 { -1.0 } else { 1.0 },
                if i & 4 == 0 { -1.0 } else { 1.0 },
            );
            vertices.push(center + s.component_mul(&half_extents));
        }
        let triangles = vec![
            [0, 2, 3],
            [0, 3, 1], // -z
            [4, 5, 7],
            [4, 7, 6], // +z
            [0, 1, 5],
            [0, 5, 4], // -y
            [2, 6, 7],
            [2, 7, 3], // +y
            [0, 4, 6],
            [0, 6, 2], // -x
            [1, 3, 7],
            [1, 7, 5], // +x
        ];
        TriangleMesh {
            vertices,
            triangles,
        }
    }
}

fn triangle_area(vertices: &[Point3], tri: &[u32; 3]) -> f64 {
    let a = vertices[tri[0] as usize];
    let b = vertices[tri[1] as usize];
    let c = vertices[tri[2] as usize];
    0.5 * (b - a).cross(&(c - a)).norm()
}
