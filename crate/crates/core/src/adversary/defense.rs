//! Preprocessing baseline defenses: simple random subsampling and
//! statistical outlier removal.

use crate::cloud::{PointCloud, Vec3};
use crate::error::{Error, Result};
use crate::geometry::{knn, KdIndex};
use crate::rng::RngHandle;

/// Keeps a uniform random subset of `keep` points, without replacement.
/// Survivors stay in their original order.
pub fn srs_defense(cloud: &PointCloud, keep: usize, rng: &mut RngHandle) -> Result<PointCloud> {
    let n = cloud.len();
    if keep > n {
        return Err(Error::InvalidArgument(format!("cannot keep {keep} of {n} points")));
    }
    if keep == 0 {
        return Err(Error::InvalidArgument("subsampling must keep at least one point".into()));
    }
    let indices = rng.sample_indices(n, keep);
    let points: Vec<Vec3> = indices.iter().map(|&i| cloud.points()[i]).collect();
    cloud.like(points)
}

/// Removes statistical outliers: points whose mean distance to their `k`
/// nearest neighbors exceeds `μ + alpha·σ`, where μ and σ are the mean and
/// standard deviation of that statistic over the whole cloud. Survivors stay
/// in their original order; `alpha = ∞` keeps everything.
pub fn sor_defense(cloud: &PointCloud, k: usize, alpha: f64) -> Result<PointCloud> {
    let n = cloud.len();
    if k == 0 {
        return Err(Error::InvalidArgument("outlier removal needs k ≥ 1 neighbors".into()));
    }
    if k + 1 > n {
        return Err(Error::InvalidArgument(format!(
            "outlier removal with k={k} needs at least {} points, got {n}",
            k + 1
        )));
    }
    if alpha.is_nan() {
        return Err(Error::InvalidArgument("alpha must not be NaN".into()));
    }
    let index = KdIndex::build(cloud);
    let mut mean_dists = Vec::with_capacity(n);
    for i in 0..n {
        let neighborhood = knn(&index, i, k + 1)?;
        let p = cloud.points()[i];
        let sum: f64 =
            neighborhood.members[1..].iter().map(|&m| (cloud.points()[m] - p).norm()).sum();
        mean_dists.push(sum / k as f64);
    }
    let mu = mean_dists.iter().sum::<f64>() / n as f64;
    let var = mean_dists.iter().map(|d| (d - mu).powi(2)).sum::<f64>() / n as f64;
    let threshold = mu + alpha * var.sqrt();
    let points: Vec<Vec3> = cloud
        .points()
        .iter()
        .zip(&mean_dists)
        .filter(|(_, &d)| d <= threshold)
        .map(|(p, _)| *p)
        .collect();
    if points.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "alpha={alpha} removed every point"
        )));
    }
    cloud.like(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::{sample_primitive, Shape};

    fn grid_cloud(extra: Option<Vec3>) -> PointCloud {
        let mut points = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                points.push(Vec3::new(i as f64 * 0.1, j as f64 * 0.1, 0.0));
            }
        }
        if let Some(p) = extra {
            points.push(p);
        }
        PointCloud::new(points).unwrap()
    }

    #[test]
    fn srs_keeping_everything_is_the_identity() {
        let mut rng = RngHandle::new(1);
        let cloud = sample_primitive(Shape::Sphere, 40, &mut rng).unwrap();
        let out = srs_defense(&cloud, 40, &mut rng).unwrap();
        assert_eq!(out.points(), cloud.points());
    }

    #[test]
    fn srs_survivors_keep_their_original_order() {
        let mut rng = RngHandle::new(2);
        let cloud = sample_primitive(Shape::Cube, 50, &mut rng).unwrap();
        let out = srs_defense(&cloud, 20, &mut rng).unwrap();
        assert_eq!(out.len(), 20);
        let mut cursor = 0;
        for p in out.points() {
            while cursor < cloud.len() && cloud.points()[cursor] != *p {
                cursor += 1;
            }
            assert!(cursor < cloud.len(), "sampled point out of order");
            cursor += 1;
        }
    }

    #[test]
    fn srs_bounds_are_enforced() {
        let mut rng = RngHandle::new(3);
        let cloud = sample_primitive(Shape::Sphere, 10, &mut rng).unwrap();
        assert!(srs_defense(&cloud, 11, &mut rng).is_err());
        assert!(srs_defense(&cloud, 0, &mut rng).is_err());
    }

    #[test]
    fn sor_removes_exactly_the_far_outlier_from_a_grid() {
        // 5×5 grid with 0.1 spacing plus one point 10.0 away (100× spacing).
        // Grid points have mean-2NN distance 0.1; the outlier's is ≈ 9.6, so
        // it alone crosses μ + 1.1σ.
        let far = Vec3::new(10.0, 0.0, 0.0);
        let cloud = grid_cloud(Some(far));
        let out = sor_defense(&cloud, 2, 1.1).unwrap();
        assert_eq!(out.len(), cloud.len() - 1);
        assert!(out.points().iter().all(|p| *p != far));
        assert_eq!(out.points(), &cloud.points()[..cloud.len() - 1]);
    }

    #[test]
    fn sor_with_infinite_alpha_is_the_identity() {
        let cloud = grid_cloud(Some(Vec3::new(10.0, 0.0, 0.0)));
        let out = sor_defense(&cloud, 2, f64::INFINITY).unwrap();
        assert_eq!(out.points(), cloud.points());
    }

    #[test]
    fn sor_on_a_uniform_grid_keeps_everything() {
        // Corner points sit slightly farther from their neighbors than
        // interior ones, but well inside μ + 1.1σ.
        let cloud = grid_cloud(None);
        let out = sor_defense(&cloud, 2, 1.1).unwrap();
        assert_eq!(out.points(), cloud.points());
    }

    #[test]
    fn sor_parameter_bounds_are_enforced() {
        let cloud = grid_cloud(None);
        assert!(sor_defense(&cloud, 0, 1.1).is_err());
        assert!(sor_defense(&cloud, 25, 1.1).is_err());
        assert!(sor_defense(&cloud, 2, f64::NAN).is_err());
    }
}
