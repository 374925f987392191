//! Synthetic surface primitives for dataset generation.
//!
//! All primitives are generated exactly on their surface, centered at the
//! origin, and sized so the longest axis spans 1 — i.e. already inscribed in
//! the unit cube that [`crate::cloud::normalize_unit_cube`] targets. Sampling
//! is uniform over surface area.

use std::fmt;
use std::str::FromStr;

use crate::cloud::{PointCloud, Vec3};
use crate::error::{Error, Result};
use crate::rng::RngHandle;

/// Default torus ring radius (distance from axis to tube center).
pub const TORUS_MAJOR_DEFAULT: f64 = 0.35;
/// Default torus tube radius. Major + minor = 0.5 keeps the torus inscribed.
pub const TORUS_MINOR_DEFAULT: f64 = 0.15;

/// A generatable surface primitive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Sphere of radius 0.5 centered at the origin.
    Sphere,
    /// Surface of the axis-aligned cube `[-0.5, 0.5]^3`.
    Cube,
    /// Torus around the z-axis: `(sqrt(x^2+y^2) - major)^2 + z^2 = minor^2`.
    Torus { major: f64, minor: f64 },
}

impl Shape {
    /// Torus with the default radii.
    pub fn torus_default() -> Shape {
        Shape::Torus { major: TORUS_MAJOR_DEFAULT, minor: TORUS_MINOR_DEFAULT }
    }

    /// Class index used for labels: sphere 0, cube 1, torus 2.
    pub fn class_index(&self) -> usize {
        match self {
            Shape::Sphere => 0,
            Shape::Cube => 1,
            Shape::Torus { .. } => 2,
        }
    }

    /// Canonical class name.
    pub fn class_name(&self) -> &'static str {
        match self {
            Shape::Sphere => "sphere",
            Shape::Cube => "cube",
            Shape::Torus { .. } => "torus",
        }
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(name: &str) -> Result<Shape> {
        match name {
            "sphere" => Ok(Shape::Sphere),
            "cube" => Ok(Shape::Cube),
            "torus" => Ok(Shape::torus_default()),
            other => Err(Error::Config(format!(
                "unknown shape name {other:?} (expected sphere, cube, or torus)"
            ))),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.class_name())
    }
}

/// Draws `n` points uniformly on the named surface.
///
/// The output is labeled with the shape's class index and lies on the exact
/// analytic surface (no added noise), so tests can verify implicit equations
/// to machine precision.
pub fn sample_primitive(shape: Shape, n: usize, rng: &mut RngHandle) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample_primitive: n must be at least 1".into()));
    }
    let points = match shape {
        Shape::Sphere => sample_sphere(n, 0.5, rng),
        Shape::Cube => sample_cube(n, rng),
        Shape::Torus { major, minor } => {
            if !(minor > 0.0 && major > minor) {
                return Err(Error::Config(format!(
                    "torus radii must satisfy 0 < minor < major (got major={major}, minor={minor})"
                )));
            }
            sample_torus(n, major, minor, rng)
        }
    };
    PointCloud::with_label(points, shape.class_index())
}

fn sample_sphere(n: usize, radius: f64, rng: &mut RngHandle) -> Vec<Vec3> {
    (0..n)
        .map(|_| {
            // Gaussian direction, renormalized; resample the (measure-zero)
            // near-origin draws rather than dividing by ~0.
            loop {
                let g = Vec3::new(rng.standard_normal(), rng.standard_normal(), rng.standard_normal());
                let norm = g.norm();
                if norm > 1e-12 {
                    return g * (radius / norm);
                }
            }
        })
        .collect()
}

fn sample_cube(n: usize, rng: &mut RngHandle) -> Vec<Vec3> {
    (0..n)
        .map(|_| {
            // Faces have equal area; pick one uniformly, then a point on it.
            let face = rng.below(6);
            let u = rng.uniform(-0.5, 0.5);
            let v = rng.uniform(-0.5, 0.5);
            let s = if face % 2 == 0 { -0.5 } else { 0.5 };
            match face / 2 {
                0 => Vec3::new(s, u, v),
                1 => Vec3::new(u, s, v),
                _ => Vec3::new(u, v, s),
            }
        })
        .collect()
}

fn sample_torus(n: usize, major: f64, minor: f64, rng: &mut RngHandle) -> Vec<Vec3> {
    (0..n)
        .map(|_| {
            let u = rng.uniform(0.0, std::f64::consts::TAU);
            // Surface area density along the tube angle is proportional to
            // major + minor*cos(v); rejection-sample v against that factor.
            let v = loop {
                let v = rng.uniform(0.0, std::f64::consts::TAU);
                let accept = (major + minor * v.cos()) / (major + minor);
                if rng.uniform(0.0, 1.0) < accept {
                    break v;
                }
            };
            let ring = major + minor * v.cos();
            Vec3::new(ring * u.cos(), ring * u.sin(), minor * v.sin())
        })
        .collect()
}
