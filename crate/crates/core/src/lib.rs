//! Distortion-aware adaptive diffusion purification for 3D point clouds.
//!
//! The library estimates how distorted a point cloud is (mean distance of
//! each point to its local best-fit plane), maps that estimate to a forward
//! diffusion depth, and runs a truncated reverse diffusion chain to project
//! the cloud back toward the clean data manifold. Around that core sit the
//! pieces needed to evaluate it end to end: synthetic datasets, a trainable
//! point denoiser and toy classifier (hand-written gradients), gradient and
//! geometric attacks, and baseline defenses.
//!
//! All computation is f64; files store f32. Every stochastic operation takes
//! an explicit [`RngHandle`], and repeated runs with the same seed produce
//! byte-identical outputs.

pub mod adversary;
pub mod cloud;
pub mod dataset;
pub mod denoiser;
pub mod diffusion;
pub mod distortion;
pub mod error;
pub mod geometry;
pub mod io;
pub mod rng;
pub mod shapes;

pub use cloud::{normalize_unit_cube, PointCloud, Vec3};
pub use error::{Error, Result};
pub use rng::RngHandle;
