//! Noise predictors used by the reverse diffusion chain.

pub mod analytic;
pub mod checkpoint;
pub mod mlp;
pub(crate) mod nn;
pub mod train;

pub use analytic::AnalyticGaussianDenoiser;
pub use checkpoint::{load_denoiser, save_denoiser};
pub use mlp::{DenoiserHyper, PointMlpDenoiser};
pub use train::{train_denoiser, DenoiserTraining, TrainingLog};

use crate::cloud::Vec3;

/// A noise predictor ε̂(x_t, t): given a noised cloud and its timestep,
/// predicts the standard-normal noise that produced it.
///
/// Implementations must be safe to call concurrently (read-only parameters)
/// and must return exactly one prediction per input point, in input order.
pub trait Denoiser: Sync {
    /// Predicted noise for each point of `x_t` at timestep `t`.
    fn predict(&self, x_t: &[Vec3], t: usize) -> Vec<Vec3>;
}
