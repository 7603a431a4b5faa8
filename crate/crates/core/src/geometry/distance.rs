use std::collections::HashMap;

use super::{Bvh, Feature, Point3, TriangleMesh};
use crate::error::{Result, SdfError};

/// Signed distance oracle for a triangle mesh.
///
/// Magnitude comes from a BVH closest-point query; the sign from the
/// angle-weighted pseudonormal of the closest feature (vertex, edge or
/// face), which is exact for closed, consistently oriented meshes.
#[derive(Debug, Clone)]
pub struct MeshSdf {
    mesh: TriangleMesh,
    bvh: Bvh,
    face_normals: Vec<Point3>,
    vertex_normals: Vec<Point3>,
    edge_normals: HashMap<(u32, u32), Point3>,
    signed: bool,
}

impl MeshSdf {
    /// Requires a watertight mesh.
    pub fn new(mesh: TriangleMesh) -> Result<Self> {
        if !mesh.is_watertight() {
            return Err(SdfError::SignUnreliable);
        }
        Ok(Self::build(mesh, true))
    }

    /// Accepts any mesh; [`MeshSdf::signed_distance`] then returns unsigned
    /// distances.
    pub fn new_unsigned(mesh: TriangleMesh) -> Self {
        Self::build(mesh, false)
    }

    fn build(mesh: TriangleMesh, signed: bool) -> Self {
        let bvh = Bvh::build(&mesh);
        let nt = mesh.triangles().len();
        let face_normals: Vec<Point3> = (0..nt).map(|t| mesh.face_normal(t)).collect();
        let mut vertex_normals = vec![Point3::zeros(); mesh.vertices().len()];
        let mut edge_normals: HashMap<(u32, u32), Point3> = HashMap::new();
        if signed {
            for (t, tri) in mesh.triangles().iter().enumerate() {
                let corners = mesh.corners(t);
                let n = face_normals[t];
                for k in 0..3 {
                    let p = corners[k];
                    let e1 = (corners[(k + 1) % 3] - p).normalize();
                    let e2 = (corners[(k + 2) % 3] - p).normalize();
                    let angle = e1.dot(&e2).clamp(-1.0, 1.0).acos();
                    vertex_normals[tri[k] as usize] += n * angle;

                    let (a, b) = (tri[k], tri[(k + 1) % 3]);
                    *edge_normals.entry((a.min(b), a.max(b))).or_insert_with(Point3::zeros) += n;
                }
            }
        }
        MeshSdf {
            mesh,
            bvh,
            face_normals,
            vertex_normals,
            edge_normals,
            signed,
        }
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn is_signed(&self) -> bool {
        self.signed
    }

    pub fn unsigned_distance(&self, p: &Point3) -> f64 {
        self.bvh
            .closest(&self.mesh, p)
            .map(|h| h.distance_squared.sqrt())
            .unwrap_or(f64::INFINITY)
    }

    /// Negative inside the closed surface. Unsigned if built with
    /// [`MeshSdf::new_unsigned`].
    pub fn signed_distance(&self, p: &Point3) -> f64 {
        let Some(hit) = self.bvh.closest(&self.mesh, p) else {
            return f64::INFINITY;
        };
        let d = hit.distance_squared.sqrt();
        if !self.signed || d == 0.0 {
            return d;
        }
        let tri = self.mesh.triangles()[hit.triangle];
        let normal = match hit.feature {
            Feature::Face => self.face_normals[hit.triangle],
            Feature::Vertex(k) => self.vertex_normals[tri[k as usize] as usize],
            Feature::Edge(k) => {
                let (a, b) = (tri[k as usize], tri[(k as usize + 1) % 3]);
                self.edge_normals[&(a.min(b), a.max(b))]
            }
        };
        if (p - hit.point).dot(&normal) >= 0.0 {
            d
        } else {
            -d
        }
    }

    /// Inside test by majority vote of ray-crossing parity over `directions`.
    /// Independent of pseudonormals; used as a cross-check.
    pub fn ray_parity_inside(&self, p: &Point3, directions: &[Point3]) -> bool {
        let votes = directions
            .iter()
            .filter(|dir| {
                let crossings = (0..self.mesh.triangles().len())
                    .filter(|&t| {
                        let [a, b, c] = self.mesh.corners(t);
                        ray_hits_triangle(p, dir, &a, &b, &c)
                    })
                    .count();
                crossings % 2 == 1
            })
            .count();
        2 * votes > directions.len()
    }
}

/// Möller–Trumbore ray/triangle test for `t > 0`.
fn ray_hits_triangle(origin: &Point3, dir: &Point3, a: &Point3, b: &Point3, c: &Point3) -> bool {
    let e1 = b - a;
    let e2 = c - a;
    let pv = dir.cross(&e2);
    let det = e1.dot(&pv);
    if det.abs() < 1e-15 {
        return false;
    }
    let inv = 1.0 / det;
    let tv = origin - a;
    let u = tv.dot(&pv) * inv;
    if !(0.0..=1.0).contains(&u) {
        return false;
    }
    let qv = tv.cross(&e1);
    let v = dir.dot(&qv) * inv;
    if v < 0.0 || u + v > 1.0 {
        return false;
    }
    e2.dot(&qv) * inv > 0.0
}
