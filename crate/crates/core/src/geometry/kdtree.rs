use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::cloud::{PointCloud, Vec3};
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 16;

/// A neighbor candidate ordered by squared distance, then by point id, so
/// equidistant points resolve to the lower id.
#[derive(Clone, Copy, Debug)]
struct Candidate {
    dist2: f64,
    id: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.id.cmp(&other.id))
    }
}

#[derive(Clone, Debug)]
struct Node {
    start: usize,
    end: usize,
    lo: [f64; 3],
    hi: [f64; 3],
    children: Option<(usize, usize)>,
}

/// Exact Euclidean kNN over a fixed cloud. Immutable after construction.
#[derive(Clone, Debug)]
pub struct SpatialIndex {
    points: Vec<Vec3>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

impl SpatialIndex {
    pub fn build(cloud: &PointCloud) -> Result<Self> {
        Self::from_points(cloud.positions())
    }

    pub fn from_points(points: &[Vec3]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if points.len() > u32::MAX as usize {
            return Err(Error::InvalidArgument("too many points".into()));
        }
        let mut index = Self {
            points: points.to_vec(),
            order: (0..points.len() as u32).collect(),
            nodes: Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1),
        };
        index.split(0, points.len());
        Ok(index)
    }

    fn split(&mut self, start: usize, end: usize) -> usize {
        let (lo, hi) = self.bounds(start, end);
        let id = self.nodes.len();
        self.nodes.push(Node {
            start,
            end,
            lo,
            hi,
            children: None,
        });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        if hi[axis] - lo[axis] <= 0.0 {
            // all coincident
            return id;
        }
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a as usize][axis]
                .total_cmp(&points[b as usize][axis])
                .then(a.cmp(&b))
        });
        let left = self.split(start, mid);
        let right = self.split(mid, end);
        self.nodes[id].children = Some((left, right));
        id
    }

    fn bounds(&self, start: usize, end: usize) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            let p = &self.points[i as usize];
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    /// The `k` nearest point ids to `query`, closest first. `k` larger than
    /// the cloud is clamped.
    pub fn knn(&self, query: &Vec3, k: usize) -> Vec<usize> {
        self.knn_with_distances(query, k)
            .into_iter()
            .map(|(id, _)| id)
            .collect()
    }

    /// As [`knn`](Self::knn), paired with squared distances.
    pub fn knn_with_distances(&self, query: &Vec3, k: usize) -> Vec<(usize, f64)> {
        let k = k.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(0, query, k, &mut heap);
        heap.into_sorted_vec()
            .into_iter()
            .map(|c| (c.id as usize, c.dist2))
            .collect()
    }

    fn search(&self, node: usize, q: &Vec3, k: usize, heap: &mut BinaryHeap<Candidate>) {
        let n = &self.nodes[node];
        match n.children {
            None => {
                for &id in &self.order[n.start..n.end] {
                    let cand = Candidate {
                        dist2: (self.points[id as usize] - q).norm_squared(),
                        id,
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Some((left, right)) => {
                let dl = self.box_dist2(left, q);
                let dr = self.box_dist2(right, q);
                let (first, d1, second, d2) = if dl <= dr {
                    (left, dl, right, dr)
                } else {
                    (right, dr, left, dl)
                };
                for (child, d) in [(first, d1), (second, d2)] {
                    // Equal bounds must still be visited: they may hold a tie
                    // with a lower id.
                    if heap.len() < k || d <= heap.peek().map_or(f64::INFINITY, |c| c.dist2) {
                        self.search(child, q, k, heap);
                    }
                }
            }
        }
    }

    fn box_dist2(&self, node: usize, q: &Vec3) -> f64 {
        let n = &self.nodes[node];
        let mut d = 0.0;
        for a in 0..3 {
            let excess = if q[a] < n.lo[a] {
                n.lo[a] - q[a]
            } else if q[a] > n.hi[a] {
                q[a] - n.hi[a]
            } else {
                0.0
            };
            d += excess * excess;
        }
        d
    }
}
