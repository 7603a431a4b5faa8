//! Bounding-volume hierarchy over mesh triangles for closest-point queries.

use super::{Aabb, Point3, TriangleMesh};

const LEAF_SIZE: usize = 4;

/// Which part of a triangle the closest point lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    /// Corner `0..3` of the triangle.
    Vertex(u8),
    /// Edge from corner `k` to corner `(k + 1) % 3`.
    Edge(u8),
    Face,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestHit {
    pub triangle: usize,
    pub point: Point3,
    pub distance_squared: f64,
    pub feature: Feature,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    /// Triangle indices, permuted so every leaf owns a contiguous range.
    order: Vec<usize>,
}

impl Bvh {
    pub fn build(mesh: &TriangleMesh) -> Bvh {
        let n = mesh.triangles().len();
        let mut order: Vec<usize> = (0..n).collect();
        let boxes: Vec<Aabb> = (0..n)
            .map(|t| {
                let mut bb = Aabb::empty();
                for c in mesh.corners(t) {
                    bb.grow(&c);
                }
                bb
            })
            .collect();
        let centroids: Vec<Point3> = boxes.iter().map(|b| b.center()).collect();
        let mut nodes = Vec::with_capacity(2 * n / LEAF_SIZE + 1);
        if n > 0 {
            build_node(&mut nodes, &mut order, 0, n, &boxes, &centroids);
        }
        Bvh { nodes, order }
    }

    /// Exact closest point on the mesh, or `None` for an empty mesh.
    pub fn closest(&self, mesh: &TriangleMesh, p: &Point3) -> Option<ClosestHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<ClosestHit> = None;
        let mut best_d2 = f64::INFINITY;
        let mut stack: Vec<(usize, f64)> = vec![(0, self.nodes[0].bounds().distance_squared(p))];
        while let Some((id, d2)) = stack.pop() {
            if d2 > best_d2 {
                continue;
            }
            match &self.nodes[id] {
                Node::Leaf { start, end, .. } => {
                    for &t in &self.order[*start..*end] {
                        let [a, b, c] = mesh.corners(t);
                        let (q, feature) = closest_point_on_triangle(p, &a, &b, &c);
                        let qd2 = (p - q).norm_squared();
                        // Ties resolve to the lowest triangle index so the
                        // result does not depend on traversal order.
                        let better = match &best {
                            None => true,
                            Some(h) => qd2 < best_d2 || (qd2 == best_d2 && t < h.triangle),
                        };
                        if better {
                            best_d2 = qd2;
                            best = Some(ClosestHit {
                                triangle: t,
                                point: q,
                                distance_squared: qd2,
                                feature,
                            });
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let dl = self.nodes[*left].bounds().distance_squared(p);
                    let dr = self.nodes[*right].bounds().distance_squared(p);
                    // Push the farther child first so the nearer is visited first.
                    if dl <= dr {
                        stack.push((*right, dr));
                        stack.push((*left, dl));
                    } else {
                        stack.push((*left, dl));
                        stack.push((*right, dr));
                    }
                }
            }
        }
        best
    }
}

fn build_node(
    nodes: &mut Vec<Node>,
    order: &mut [usize],
    start: usize,
    end: usize,
    boxes: &[Aabb],
    centroids: &[Point3],
) -> usize {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &t in &order[start..end] {
        bounds = bounds.union(&boxes[t]);
        cbounds.grow(&centroids[t]);
    }
    let id = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { bounds, start, end });
        return id;
    }
    let extent = cbounds.extent();
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };
    let mid = (start + end) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        centroids[a][axis]
            .total_cmp(&centroids[b][axis])
            .then(a.cmp(&b))
    });
    nodes.push(Node::Leaf {
        bounds,
        start,
        end,
    });
    let left = build_node(nodes, order, start, mid, boxes, centroids);
    let right = build_node(nodes, order, mid, end, boxes, centroids);
    nodes[id] = Node::Inner {
        bounds,
        left,
        right,
    };
    id
}

/// Closest point on triangle `abc` to `p` together with the feature it lies
/// on (Voronoi-region walk).
pub fn closest_point_on_triangle(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> (Point3, Feature) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, Feature::Vertex(0));
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, Feature::Vertex(1));
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, Feature::Edge(0));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, Feature::Vertex(2));
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, Feature::Edge(2));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, Feature::Edge(1));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, Feature::Face)
}
