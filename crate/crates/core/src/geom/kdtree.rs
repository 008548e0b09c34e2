use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::Point3;
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 12;

/// A neighbor returned by a query: index into the indexed cloud and the
/// Euclidean distance to the query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

/// Static kd-tree over 3D points.
///
/// Results are ordered by `(squared distance, index)`, so ties are broken by
/// the lower point index. Far subtrees are visited whenever the splitting
/// plane is not strictly farther than the current worst candidate, which
/// keeps the tie rule exact.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<[f64; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(Clone, Copy, PartialEq)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[inline]
pub(crate) fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

impl KdTree {
    pub fn new(points: &[Point3]) -> Self {
        let pts: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        let mut order: Vec<usize> = (0..pts.len()).collect();
        let mut nodes = Vec::new();
        if !pts.is_empty() {
            build(&pts, &mut order, 0, pts.len(), &mut nodes);
        }
        Self {
            points: pts,
            order,
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The `min(k, len)` nearest points to `query`, ascending.
    pub fn knn(&self, query: &Point3, k: usize) -> Result<Vec<Neighbor>> {
        if self.is_empty() {
            return Err(Error::EmptyIndex);
        }
        if k == 0 {
            return Err(Error::param("k must be >= 1"));
        }
        let q = [query.x, query.y, query.z];
        let k = k.min(self.len());
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_rec(0, &q, k, &mut heap);
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort_unstable();
        Ok(out
            .into_iter()
            .map(|c| Neighbor {
                index: c.index,
                distance: c.dist2.sqrt(),
            })
            .collect())
    }

    /// Nearest point to `query`.
    pub fn nearest(&self, query: &Point3) -> Result<Neighbor> {
        if self.is_empty() {
            return Err(Error::EmptyIndex);
        }
        let q = [query.x, query.y, query.z];
        let mut best = Candidate {
            dist2: f64::INFINITY,
            index: usize::MAX,
        };
        self.nearest_rec(0, &q, &mut best);
        Ok(Neighbor {
            index: best.index,
            distance: best.dist2.sqrt(),
        })
    }

    /// All points within `radius` (inclusive) of `query`, ascending.
    pub fn within_radius(&self, query: &Point3, radius: f64) -> Result<Vec<Neighbor>> {
        if self.is_empty() {
            return Err(Error::EmptyIndex);
        }
        let q = [query.x, query.y, query.z];
        let r2 = radius * radius;
        let mut out = Vec::new();
        self.radius_rec(0, &q, r2, &mut out);
        out.sort_unstable();
        Ok(out
            .into_iter()
            .map(|c| Neighbor {
                index: c.index,
                distance: c.dist2.sqrt(),
            })
            .collect())
    }

    fn knn_rec(&self, node: usize, q: &[f64; 3], k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let c = Candidate {
                        dist2: dist2(q, &self.points[i]),
                        index: i,
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[dim] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.knn_rec(near, q, k, heap);
                if heap.len() < k || diff * diff <= heap.peek().unwrap().dist2 {
                    self.knn_rec(far, q, k, heap);
                }
            }
        }
    }

    fn nearest_rec(&self, node: usize, q: &[f64; 3], best: &mut Candidate) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let c = Candidate {
                        dist2: dist2(q, &self.points[i]),
                        index: i,
                    };
                    if c < *best {
                        *best = c;
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[dim] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.nearest_rec(near, q, best);
                if diff * diff <= best.dist2 {
                    self.nearest_rec(far, q, best);
                }
            }
        }
    }

    fn radius_rec(&self, node: usize, q: &[f64; 3], r2: f64, out: &mut Vec<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d2 = dist2(q, &self.points[i]);
                    if d2 <= r2 {
                        out.push(Candidate { dist2: d2, index: i });
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[dim] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.radius_rec(near, q, r2, out);
                if diff * diff <= r2 {
                    self.radius_rec(far, q, r2, out);
                }
            }
        }
    }
}

fn build(
    pts: &[[f64; 3]],
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let id = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { start, end });
        return id;
    }
    // split along the widest axis
    let slice = &order[start..end];
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in slice {
        for d in 0..3 {
            lo[d] = lo[d].min(pts[i][d]);
            hi[d] = hi[d].max(pts[i][d]);
        }
    }
    let dim = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap();
    if hi[dim] - lo[dim] == 0.0 {
        nodes.push(Node::Leaf { start, end });
        return id;
    }
    let mid = start + (end - start) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| pts[a][dim].total_cmp(&pts[b][dim]));
    let value = pts[order[mid]][dim];
    nodes.push(Node::Leaf { start, end });
    let left = build(pts, order, start, mid, nodes);
    let right = build(pts, order, mid, end, nodes);
    nodes[id] = Node::Split {
        dim,
        value,
        left,
        right,
    };
    id
}
