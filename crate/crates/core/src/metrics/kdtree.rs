use crate::geometry::Point3;

const LEAF: usize = 8;

/// Static 3-d tree for exact nearest-neighbour queries.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point3>,
    /// Implicit balanced tree over `points`: node `[lo, hi)` splits at the
    /// median on `axes[node]`.
    axes: Vec<u8>,
}

impl KdTree {
    pub fn new(points: &[Point3]) -> KdTree {
        let mut points = points.to_vec();
        let mut axes = vec![0u8; node_count(points.len())];
        build(&mut points, 0, &mut axes);
        KdTree { points, axes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Squared distance from `q` to its nearest point, computed exactly as
    /// `(q − p).norm_squared()`.
    pub fn nearest_distance_squared(&self, q: &Point3) -> f64 {
        let mut best = f64::INFINITY;
        self.search(0, self.points.len(), 0, q, &mut best);
        best
    }

    fn search(&self, lo: usize, hi: usize, node: usize, q: &Point3, best: &mut f64) {
        if hi - lo <= LEAF {
            for p in &self.points[lo..hi] {
                let d = (q - p).norm_squared();
                if d < *best {
                    *best = d;
                }
            }
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let axis = self.axes[node] as usize;
        let pivot = &self.points[mid];
        let d = (q - pivot).norm_squared();
        if d < *best {
            *best = d;
        }
        let diff = q[axis] - pivot[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        let child = |r: (usize, usize)| if r.0 == lo { 2 * node + 1 } else { 2 * node + 2 };
        self.search(near.0, near.1, child(near), q, best);
        if diff * diff <= *best {
            self.search(far.0, far.1, child(far), q, best);
        }
    }
}

fn node_count(n: usize) -> usize {
    // Enough slots for the implicit tree's deepest index.
    (2 * n.next_power_of_two()).max(1)
}

fn build(points: &mut [Point3], node: usize, axes: &mut [u8]) {
    let n = points.len();
    if n <= LEAF {
        return;
    }
    let (mut lo, mut hi) = (Point3::repeat(f64::INFINITY), Point3::repeat(f64::NEG_INFINITY));
    for p in points.iter() {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let ext = hi - lo;
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    axes[node] = axis as u8;
    let mid = n / 2;
    points.select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
    let (left, rest) = points.split_at_mut(mid);
    build(left, 2 * node + 1, axes);
    build(&mut rest[1..], 2 * node + 2, axes);
}
