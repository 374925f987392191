//! Point cloud container and normalization.

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// A 3D point; computation is done in f64 throughout, files store f32.
pub type Vec3 = Vector3<f64>;

/// An unordered set of 3D points with an optional class label.
///
/// Invariants enforced on construction: at least one point, every coordinate
/// finite. Point order is nevertheless preserved everywhere — downstream
/// operations rely on stable indices for determinism.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
    label: Option<usize>,
}

impl PointCloud {
    /// Builds a cloud, rejecting empty point lists and non-finite coordinates.
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("point cloud must contain at least one point".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "non-finite coordinate at point {i}: ({}, {}, {})",
                    p.x, p.y, p.z
                )));
            }
        }
        Ok(PointCloud { points, label: None })
    }

    /// Same as [`PointCloud::new`] with a class label attached.
    pub fn with_label(points: Vec<Vec3>, label: usize) -> Result<Self> {
        let mut cloud = PointCloud::new(points)?;
        cloud.label = Some(label);
        Ok(cloud)
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false for a constructed cloud; kept for idiomatic completeness.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The points, in stored order.
    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    /// Class label, if any.
    pub fn label(&self) -> Option<usize> {
        self.label
    }

    /// Returns a copy with the label replaced.
    pub fn relabeled(&self, label: Option<usize>) -> PointCloud {
        PointCloud { points: self.points.clone(), label }
    }

    /// Builds a cloud with the same label from new points.
    ///
    /// Used by transformations (diffusion, attacks) that must carry the label
    /// through unchanged.
    pub fn like(&self, points: Vec<Vec3>) -> Result<PointCloud> {
        let mut cloud = PointCloud::new(points)?;
        cloud.label = self.label;
        Ok(cloud)
    }

    /// Axis-aligned bounding box as (min, max) corners.
    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = self.points[0];
        let mut hi = self.points[0];
        for p in &self.points[1..] {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }

    /// Arithmetic mean of the points.
    pub fn centroid(&self) -> Vec3 {
        let mut sum = Vec3::zeros();
        for p in &self.points {
            sum += p;
        }
        sum / self.points.len() as f64
    }
}

/// Centers the bounding box at the origin and scales uniformly so the longest
/// axis spans exactly 1.
///
/// A degenerate cloud (all points identical, so every span is zero) maps to
/// all zeros. The label is preserved. Scaling is uniform, so shape is
/// preserved exactly; applying the function twice is a fixed point up to
/// floating-point roundoff.
pub fn normalize_unit_cube(cloud: &PointCloud) -> PointCloud {
    let (lo, hi) = cloud.bounding_box();
    let center = (lo + hi) / 2.0;
    let longest = (hi - lo).max();
    let points = if longest == 0.0 {
        vec![Vec3::zeros(); cloud.len()]
    } else {
        let scale = 1.0 / longest;
        cloud.points().iter().map(|p| (p - center) * scale).collect()
    };
    PointCloud { points, label: cloud.label() }
}
