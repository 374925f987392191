//! Least-squares plane fitting for local neighborhoods.

use nalgebra::Matrix3;

use crate::cloud::{PointCloud, Vec3};
use crate::error::{Error, Result};
use crate::geometry::kdtree::Neighborhood;

/// A plane fit to a neighborhood.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedPlane {
    /// Unit normal, sign-canonicalized: the component with the largest
    /// magnitude (lowest axis wins magnitude ties) is positive.
    pub normal: Vec3,
    /// Point the plane passes through (the neighborhood centroid).
    pub anchor: Vec3,
    /// Sum of absolute point-plane distances over the neighborhood.
    pub residual_sum: f64,
}

/// Fits the least-squares plane through a neighborhood of a cloud.
pub fn fit_plane(cloud: &PointCloud, neighborhood: &Neighborhood) -> Result<FittedPlane> {
    let points: Vec<Vec3> = neighborhood.members.iter().map(|&i| cloud.points()[i]).collect();
    fit_plane_points(&points)
}

/// Fits the least-squares plane through a point set.
///
/// The plane anchors at the centroid; the normal is the eigenvector of the
/// centered scatter matrix with the smallest eigenvalue, which minimizes the
/// sum of squared point-plane distances over all planes. Needs at least 3
/// points; a neighborhood whose points all coincide has no plane and is
/// reported as degenerate.
pub fn fit_plane_points(points: &[Vec3]) -> Result<FittedPlane> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "plane fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    let mut centroid = Vec3::zeros();
    for p in points {
        centroid += p;
    }
    centroid /= points.len() as f64;

    let mut scatter = Matrix3::<f64>::zeros();
    for p in points {
        let d = p - centroid;
        scatter += d * d.transpose();
    }
    if scatter.trace() == 0.0 {
        return Err(Error::DegenerateNeighborhood);
    }

    let eigen = nalgebra::SymmetricEigen::new(scatter);
    let mut smallest = 0;
    for i in 1..3 {
        if eigen.eigenvalues[i] < eigen.eigenvalues[smallest] {
            smallest = i;
        }
    }
    let mut normal: Vec3 = eigen.eigenvectors.column(smallest).into();
    normal /= normal.norm();

    // Canonical sign: make the largest-magnitude component positive so the
    // same geometry always yields the same normal.
    let mut lead = 0;
    for a in 1..3 {
        if normal[a].abs() > normal[lead].abs() {
            lead = a;
        }
    }
    if normal[lead] < 0.0 {
        normal = -normal;
    }

    let residual_sum = points.iter().map(|p| ((p - centroid).dot(&normal)).abs()).sum();
    Ok(FittedPlane { normal, anchor: centroid, residual_sum })
}

/// Perpendicular distance from a point to a fitted plane (always ≥ 0).
pub fn point_plane_distance(point: &Vec3, plane: &FittedPlane) -> f64 {
    ((point - plane.anchor).dot(&plane.normal)).abs()
}
