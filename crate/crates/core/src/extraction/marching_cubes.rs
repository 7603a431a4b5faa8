//! Marching cubes over a [`ScalarGrid`].
//!
//! The 256-entry triangle table is derived at first use from a per-face
//! rule rather than typed in: on every cube face, crossings are joined so
//! that inside corners (value below the iso level) are kept apart when the
//! face is ambiguous. Adjacent cells see the same corner signs on their
//! shared face and therefore produce matching boundary segments, so the
//! extracted surface is closed and consistently oriented whenever it stays
//! away from the grid boundary.

use std::collections::HashMap;
use std::sync::OnceLock;

use rayon::prelude::*;

use super::ScalarGrid;
use crate::error::Result;
use crate::geometry::{Point3, TriangleMesh};

/// Weld tolerance applied to the extracted vertices.
pub const WELD_TOLERANCE: f64 = 1e-7;

/// Cube corner offsets.
const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

/// Cube edges as corner pairs.
const EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

/// Cube faces as corner cycles (orientation fixed up at table build).
const FACES: [([usize; 4], [i32; 3]); 6] = [
    ([0, 1, 2, 3], [0, 0, -1]),
    ([4, 5, 6, 7], [0, 0, 1]),
    ([0, 1, 5, 4], [0, -1, 0]),
    ([3, 2, 6, 7], [0, 1, 0]),
    ([0, 3, 7, 4], [-1, 0, 0]),
    ([1, 2, 6, 5], [1, 0, 0]),
];

/// Triangles (as cube-edge triples) for each of the 256 corner-sign cases.
pub fn triangle_table() -> &'static [Vec<[u8; 3]>; 256] {
    static TABLE: OnceLock<[Vec<[u8; 3]>; 256]> = OnceLock::new();
    TABLE.get_or_init(build_table)
}

fn corner_pos(c: usize) -> Point3 {
    let [x, y, z] = CORNERS[c];
    Point3::new(x as f64, y as f64, z as f64)
}

fn edge_between(a: usize, b: usize) -> usize {
    EDGES
        .iter()
        .position(|e| (e[0] == a && e[1] == b) || (e[0] == b && e[1] == a))
        .expect("corners are not adjacent")
}

/// Face cycles ordered counter-clockwise when seen from outside the cube.
fn oriented_faces() -> Vec<[usize; 4]> {
    FACES
        .iter()
        .map(|(cycle, outward)| {
            let p: Vec<Point3> = cycle.iter().map(|&c| corner_pos(c)).collect();
            let n = (p[1] - p[0]).cross(&(p[2] - p[1]));
            let out = Point3::new(outward[0] as f64, outward[1] as f64, outward[2] as f64);
            if n.dot(&out) > 0.0 {
                *cycle
            } else {
                [cycle[0], cycle[3], cycle[2], cycle[1]]
            }
        })
        .collect()
}

fn loops_for_case(case: usize, faces: &[[usize; 4]]) -> Vec<Vec<usize>> {
    let inside = |c: usize| case & (1 << c) != 0;
    // Directed segments between crossing edges: start edge -> end edge.
    let mut next: HashMap<usize, usize> = HashMap::new();
    for face in faces {
        let flags: Vec<bool> = face.iter().map(|&c| inside(c)).collect();
        let n_inside = flags.iter().filter(|&&f| f).count();
        if n_inside == 0 || n_inside == 4 {
            continue;
        }
        let ambiguous = n_inside == 2 && flags[0] == flags[2];
        // Walk the cycle; every maximal run of inside corners (or each
        // inside corner alone on an ambiguous face) yields one segment from
        // the edge leaving the run back to the edge entering it.
        for k in 0..4 {
            if !flags[k] {
                continue;
            }
            let prev = (k + 3) % 4;
            let starts_run = !flags[prev] || ambiguous;
            if !starts_run {
                continue;
            }
            let mut end = k;
            if !ambiguous {
                while flags[(end + 1) % 4] {
                    end = (end + 1) % 4;
                }
            }
            let entering = edge_between(face[prev], face[k]);
            let leaving = edge_between(face[end], face[(end + 1) % 4]);
            let clash = next.insert(leaving, entering);
            debug_assert!(clash.is_none());
        }
    }
    let mut loops = Vec::new();
    let mut edges: Vec<usize> = next.keys().copied().collect();
    edges.sort_unstable();
    let mut used = [false; 12];
    for start in edges {
        if used[start] {
            continue;
        }
        let mut lp = vec![start];
        used[start] = true;
        let mut e = next[&start];
        while e != start {
            used[e] = true;
            lp.push(e);
            e = next[&e];
        }
        loops.push(lp);
    }
    loops
}

/// Triangulates the polygon `0..n` (in order) using only chords accepted by
/// `allowed`; triangles keep the polygon's orientation.
fn triangulate_loop(n: usize, allowed: &dyn Fn(usize, usize) -> bool) -> Option<Vec<[usize; 3]>> {
    fn solve(i: usize, j: usize, allowed: &dyn Fn(usize, usize) -> bool, out: &mut Vec<[usize; 3]>) -> bool {
        if j - i < 2 {
            return true;
        }
        for k in i + 1..j {
            let left_ok = k == i + 1 || allowed(i, k);
            let right_ok = k + 1 == j || allowed(k, j);
            if left_ok && right_ok {
                let mark = out.len();
                out.push([i, k, j]);
                if solve(i, k, allowed, out) && solve(k, j, allowed, out) {
                    return true;
                }
                out.truncate(mark);
            }
        }
        false
    }
    let mut out = Vec::with_capacity(n.saturating_sub(2));
    solve(0, n - 1, allowed, &mut out).then_some(out)
}

fn build_table() -> [Vec<[u8; 3]>; 256] {
    let faces = oriented_faces();
    let mut table: [Vec<[u8; 3]>; 256] = std::array::from_fn(|_| Vec::new());
    // A chord between two crossings on the same cube face would also be
    // visible to the neighbouring cell, so loops are split only along chords
    // through the cube interior.
    let on_face = |e: usize, f: &[usize; 4]| f.contains(&EDGES[e][0]) && f.contains(&EDGES[e][1]);
    let interior_chord = |a: usize, b: usize| !faces.iter().any(|f| on_face(a, f) && on_face(b, f));
    for (case, entry) in table.iter_mut().enumerate() {
        for lp in loops_for_case(case, &faces) {
            let tris = triangulate_loop(lp.len(), &|i, j| interior_chord(lp[i], lp[j]))
                .unwrap_or_else(|| panic!("no valid triangulation for case {case}"));
            entry.extend(tris.into_iter().map(|[i, j, k]| [lp[i] as u8, lp[j] as u8, lp[k] as u8]));
        }
    }
    // Orient so normals point from inside (negative) to outside: check the
    // single-corner case, whose triangle must face away from corner 0.
    let midpoint = |e: u8| (corner_pos(EDGES[e as usize][0]) + corner_pos(EDGES[e as usize][1])) * 0.5;
    let [a, b, c] = table[1][0];
    let n = (midpoint(b) - midpoint(a)).cross(&(midpoint(c) - midpoint(a)));
    if n.dot(&Point3::new(1.0, 1.0, 1.0)) < 0.0 {
        for entry in table.iter_mut() {
            for t in entry.iter_mut() {
                t.swap(1, 2);
            }
        }
    }
    table
}

/// Extracts the `iso` level set as a welded triangle mesh with normals
/// pointing toward increasing field values. Returns an empty mesh when the
/// field never crosses `iso`.
pub fn marching_cubes(grid: &ScalarGrid, iso: f64) -> Result<TriangleMesh> {
    let table = triangle_table();
    let [nx, ny, nz] = grid.resolution();
    let cells_z = nz - 1;

    // Global edge id: 3 axis-aligned edges per grid vertex.
    let edge_id = |i: usize, j: usize, k: usize, axis: usize| ((i + nx * (j + ny * k)) * 3 + axis) as u64;

    let slabs: Vec<Vec<[u64; 3]>> = (0..cells_z)
        .into_par_iter()
        .map(|k| {
            let mut tris = Vec::new();
            for j in 0..ny - 1 {
                for i in 0..nx - 1 {
                    let mut case = 0usize;
                    for (c, off) in CORNERS.iter().enumerate() {
                        if grid.value(i + off[0], j + off[1], k + off[2]) < iso {
                            case |= 1 << c;
                        }
                    }
                    for t in &table[case] {
                        let mut ids = [0u64; 3];
                        for (slot, &e) in t.iter().enumerate() {
                            let [a, b] = EDGES[e as usize];
                            let (ca, cb) = (CORNERS[a], CORNERS[b]);
                            let lo = [ca[0].min(cb[0]), ca[1].min(cb[1]), ca[2].min(cb[2])];
                            let axis = (0..3).find(|&d| ca[d] != cb[d]).unwrap();
                            ids[slot] = edge_id(i + lo[0], j + lo[1], k + lo[2], axis);
                        }
                        tris.push(ids);
                    }
                }
            }
            tris
        })
        .collect();

    // Deterministic merge: vertices numbered by first appearance in slab order.
    let mut index_of: HashMap<u64, u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for tris in slabs {
        for ids in tris {
            let mut tri = [0u32; 3];
            for (slot, &id) in ids.iter().enumerate() {
                tri[slot] = *index_of.entry(id).or_insert_with(|| {
                    vertices.push(edge_vertex(grid, id, iso, nx, ny));
                    (vertices.len() - 1) as u32
                });
            }
            triangles.push(tri);
        }
    }
    if triangles.is_empty() {
        return Ok(TriangleMesh::empty());
    }
    TriangleMesh::new(vertices, triangles)?.welded(WELD_TOLERANCE)
}

fn edge_vertex(grid: &ScalarGrid, id: u64, iso: f64, nx: usize, ny: usize) -> Point3 {
    let axis = (id % 3) as usize;
    let v = (id / 3) as usize;
    let i = v % nx;
    let j = (v / nx) % ny;
    let k = v / (nx * ny);
    let (mut i2, mut j2, mut k2) = (i, j, k);
    match axis {
        0 => i2 += 1,
        1 => j2 += 1,
        _ => k2 += 1,
    }
    let (v0, v1) = (grid.value(i, j, k), grid.value(i2, j2, k2));
    let (p0, p1) = (grid.point(i, j, k), grid.point(i2, j2, k2));
    let t = (iso - v0) / (v1 - v0);
    p0 + (p1 - p0) * t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Aabb, AnalyticShape};

    #[test]
    fn table_cases_are_complementary() {
        let table = triangle_table();
        assert!(table[0].is_empty() && table[255].is_empty());
        for (case, tris) in table.iter().enumerate() {
            for (e, [a, b]) in EDGES.iter().enumerate() {
                let crosses = ((case >> a) & 1) != ((case >> b) & 1);
                let used = tris.iter().any(|t| t.contains(&(e as u8)));
                assert_eq!(crosses, used, "case {case} edge {e}");
            }
        }
    }

    fn sphere_grid(res: usize) -> ScalarGrid {
        let s = AnalyticShape::sphere(Point3::zeros(), 0.5);
        ScalarGrid::from_fn([res; 3], Aabb::cube(1.1), |p| s.signed_distance(p))
    }

    #[test]
    fn sphere_vertices_near_radius_and_outward() {
        let grid = sphere_grid(32);
        let mesh = marching_cubes(&grid, 0.0).unwrap();
        assert!(!mesh.is_empty());
        let diag = grid.cell_size().norm();
        for v in mesh.vertices() {
            assert!((v.norm() - 0.5).abs() <= diag);
        }
        for t in 0..mesh.triangles().len() {
            let [a, b, c] = mesh.corners(t);
            assert!(mesh.face_normal(t).dot(&((a + b + c) / 3.0)) > 0.0);
        }
        assert!(mesh.is_watertight());
    }

    #[test]
    fn linear_field_vertices_are_exact() {
        let grid = ScalarGrid::from_fn([9, 9, 9], Aabb::cube(1.0), |p| 0.3 * p.x - 0.7 * p.y + 0.2 * p.z - 0.05);
        let mesh = marching_cubes(&grid, 0.0).unwrap();
        for v in mesh.vertices() {
            assert!((0.3 * v.x - 0.7 * v.y + 0.2 * v.z - 0.05).abs() < 1e-12);
        }
    }

    #[test]
    fn no_crossing_gives_empty_mesh() {
        let grid = ScalarGrid::from_fn([5, 5, 5], Aabb::cube(1.0), |p| 3.0 + p.x);
        assert!(marching_cubes(&grid, 0.0).unwrap().is_empty());
    }

    #[test]
    fn flipped_field_flips_orientation() {
        let grid = sphere_grid(16);
        let neg = ScalarGrid::from_fn([16; 3], Aabb::cube(1.1), |p| 0.5 - p.norm());
        let a = marching_cubes(&grid, 0.0).unwrap();
        let b = marching_cubes(&neg, 0.0).unwrap();
        assert_eq!(a.triangles().len(), b.triangles().len());
        let area = |m: &TriangleMesh| m.total_area();
        assert!((area(&a) - area(&b)).abs() < 1e-9);
        for t in 0..b.triangles().len() {
            let [p, q, r] = b.corners(t);
            assert!(b.face_normal(t).dot(&((p + q + r) / 3.0)) < 0.0);
        }
    }

    #[test]
    fn random_fields_are_watertight() {
        use rand::Rng;
        let mut rng = crate::rng::seeded(21);
        for _ in 0..20 {
            let n = 8;
            let mut values = vec![0.0; n * n * n];
            for k in 0..n {
                for j in 0..n {
                    for i in 0..n {
                        let border = i == 0 || j == 0 || k == 0 || i == n - 1 || j == n - 1 || k == n - 1;
                        values[i + n * (j + n * k)] = if border {
                            1.0
                        } else {
                            rng.random_range(-1.0..1.0)
                        };
                    }
                }
            }
            let grid = ScalarGrid::new([n; 3], Aabb::cube(1.0), values).unwrap();
            let mesh = marching_cubes(&grid, 0.0).unwrap();
            if !mesh.is_empty() {
                assert!(mesh.is_watertight());
            }
        }
    }
}

