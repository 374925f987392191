//! kd-tree nearest-neighbor index.
//!
//! Queries return exactly what exhaustive search returns: candidates ranked
//! by squared distance, ties broken by lower point index. That contract is
//! load-bearing — downstream plane fits and distortion scores must not depend
//! on traversal order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::cloud::{PointCloud, Vec3};
use crate::error::{Error, Result};

/// A neighbor candidate ordered by `(squared distance, index)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist_sq: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // Distances are finite by construction (finite coordinates only).
        self.dist_sq
            .partial_cmp(&other.dist_sq)
            .expect("finite distances")
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
struct Node {
    point: usize,
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

/// Spatial index over a fixed set of points.
#[derive(Debug, Clone)]
pub struct KdIndex {
    points: Vec<Vec3>,
    nodes: Vec<Node>,
    root: Option<usize>,
}

impl KdIndex {
    /// Builds the index over a cloud's points.
    pub fn build(cloud: &PointCloud) -> KdIndex {
        let points = cloud.points().to_vec();
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = build_recursive(&points, &mut order, 0, &mut nodes);
        KdIndex { points, nodes, root }
    }

    /// Number of indexed points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// True when no points are indexed.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The indexed points.
    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    /// The `k` nearest indexed points to `query`, as `(index, squared
    /// distance)` sorted ascending by `(distance, index)`.
    ///
    /// Errors when `k` is zero or exceeds the indexed point count.
    pub fn k_nearest(&self, query: &Vec3, k: usize) -> Result<Vec<(usize, f64)>> {
        if k == 0 || k > self.points.len() {
            return Err(Error::InvalidArgument(format!(
                "k_nearest: k={k} out of range for {} indexed points",
                self.points.len()
            )));
        }
        // Max-heap of the current best k; the root is the worst kept candidate.
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        self.search(self.root, query, k, &mut heap);
        let mut found = heap.into_vec();
        found.sort_unstable();
        Ok(found.into_iter().map(|c| (c.index, c.dist_sq)).collect())
    }

    /// The single nearest indexed point to `query` (index, squared distance).
    pub fn nearest(&self, query: &Vec3) -> Result<(usize, f64)> {
        Ok(self.k_nearest(query, 1)?[0])
    }

    fn search(&self, at: Option<usize>, query: &Vec3, k: usize, heap: &mut BinaryHeap<Candidate>) {
        let Some(ni) = at else { return };
        let node = &self.nodes[ni];
        let p = &self.points[node.point];
        let cand = Candidate { dist_sq: (p - query).norm_squared(), index: node.point };
        if heap.len() < k {
            heap.push(cand);
        } else if cand < *heap.peek().expect("non-empty at capacity") {
            heap.pop();
            heap.push(cand);
        }

        let diff = query[node.axis] - p[node.axis];
        let (near, far) = if diff < 0.0 { (node.left, node.right) } else { (node.right, node.left) };
        self.search(near, query, k, heap);
        // The far half-space can only matter if the splitting plane is within
        // the worst kept distance — or exactly at it, where a lower index
        // could still win the tie.
        let visit_far = heap.len() < k || diff * diff <= heap.peek().expect("full heap").dist_sq;
        if visit_far {
            self.search(far, query, k, heap);
        }
    }
}

fn build_recursive(points: &[Vec3], order: &mut [usize], depth: usize, nodes: &mut Vec<Node>) -> Option<usize> {
    if order.is_empty() {
        return None;
    }
    let axis = depth % 3;
    let mid = order.len() / 2;
    // Median split; key by (coordinate, index) so duplicate coordinates
    // partition deterministically.
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a][axis]
            .partial_cmp(&points[b][axis])
            .expect("finite coordinates")
            .then(a.cmp(&b))
    });
    let point = order[mid];
    let slot = nodes.len();
    nodes.push(Node { point, axis, left: None, right: None });
    let (lo, rest) = order.split_at_mut(mid);
    let hi = &mut rest[1..];
    let left = build_recursive(points, lo, depth + 1, nodes);
    let right = build_recursive(points, hi, depth + 1, nodes);
    nodes[slot].left = left;
    nodes[slot].right = right;
    Some(slot)
}

/// A point's K-nearest neighborhood within its own cloud.
///
/// `members` lists the center first, then the K−1 nearest *other* points in
/// nondecreasing distance order (ties by lower index). Indices never repeat.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhood {
    /// Index of the query point.
    pub center_index: usize,
    /// Member indices; `members[0] == center_index`, length K.
    pub members: Vec<usize>,
}

impl Neighborhood {
    /// Neighborhood size K (center included).
    pub fn k(&self) -> usize {
        self.members.len()
    }
}

/// The K-member neighborhood of `center_index`: the center plus its K−1
/// nearest distinct-index neighbors.
///
/// Errors when `k` is zero, exceeds the cloud size, or the center index is
/// out of range.
pub fn knn(index: &KdIndex, center_index: usize, k: usize) -> Result<Neighborhood> {
    let n = index.len();
    if center_index >= n {
        return Err(Error::InvalidArgument(format!("knn: center index {center_index} out of range ({n} points)")));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("knn: k={k} out of range for cloud of {n} points")));
    }
    let query = index.points()[center_index];
    // Over-fetch by one so the center itself can be dropped from the ranking;
    // duplicates of the center located at other indices stay eligible.
    let fetch = (k + 1).min(n);
    let ranked = index.k_nearest(&query, fetch)?;
    let mut members = Vec::with_capacity(k);
    members.push(center_index);
    members.extend(ranked.iter().map(|&(i, _)| i).filter(|&i| i != center_index).take(k - 1));
    debug_assert_eq!(members.len(), k);
    Ok(Neighborhood { center_index, members })
}
