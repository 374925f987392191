//! Chamfer distance between point clouds.

use crate::cloud::PointCloud;
use crate::geometry::kdtree::KdIndex;

/// Mean squared nearest-neighbor distance from each cloud to the other,
/// summed over both directions:
///
/// `CD(A, B) = (1/|A|) Σ_a min_b ‖a−b‖² + (1/|B|) Σ_b min_a ‖a−b‖²`
///
/// Symmetric by construction — swapping the arguments swaps the two
/// commutative addends, so `chamfer_distance(a, b) == chamfer_distance(b, a)`
/// exactly. Zero iff the two clouds cover the same point set.
pub fn chamfer_distance(a: &PointCloud, b: &PointCloud) -> f64 {
    directed_mean_sq(a, b) + directed_mean_sq(b, a)
}

fn directed_mean_sq(from: &PointCloud, to: &PointCloud) -> f64 {
    let index = KdIndex::build(to);
    let mut sum = 0.0;
    for p in from.points() {
        let (_, dist_sq) = index.nearest(p).expect("non-empty cloud");
        sum += dist_sq;
    }
    sum / from.len() as f64
}
