//! Noise-matching training for the point-set denoiser.
//!
//! Standard diffusion objective: draw a clean cloud, a timestep
//! `t ~ Uniform{1..T}`, and noise ε; form `x_t = √ᾱ_t·x_0 + √(1−ᾱ_t)·ε`;
//! regress the network's prediction onto ε with mean-squared error.

use rayon::prelude::*;

use crate::cloud::Vec3;
use crate::dataset::LabeledDataset;
use crate::denoiser::mlp::{DenoiserHyper, PointMlpDenoiser};
use crate::denoiser::nn::clip_gradient;
use crate::diffusion::NoiseSchedule;
use crate::error::{Error, Result};
use crate::rng::RngHandle;

/// Gradient-norm ceiling applied before every SGD step.
const GRAD_CLIP_NORM: f64 = 5.0;

/// Clouds held out per validation batch.
const VALIDATION_CLOUDS: usize = 8;

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiserTraining {
    pub epochs: usize,
    /// Clouds per SGD step.
    pub batch: usize,
    pub learning_rate: f64,
    pub hyper: DenoiserHyper,
}

impl Default for DenoiserTraining {
    fn default() -> Self {
        DenoiserTraining {
            epochs: 30,
            batch: 8,
            learning_rate: 0.05,
            hyper: DenoiserHyper::default(),
        }
    }
}

/// Per-epoch loss traces.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLog {
    /// Validation loss of the untrained network.
    pub initial_validation_loss: f64,
    /// Mean training loss per epoch.
    pub train_losses: Vec<f64>,
    /// Loss on the fixed validation batch after each epoch.
    pub validation_losses: Vec<f64>,
}

/// One pre-noised example: the diffused cloud and the noise that made it.
struct NoisedExample {
    x_t: Vec<Vec3>,
    t: usize,
    eps: Vec<Vec3>,
}

fn noise_example(points: &[Vec3], t: usize, schedule: &NoiseSchedule, rng: &mut RngHandle) -> NoisedExample {
    let scale = schedule.alpha_bar(t).sqrt();
    let spread = (1.0 - schedule.alpha_bar(t)).sqrt();
    let mut eps = Vec::with_capacity(points.len());
    let x_t = points
        .iter()
        .map(|p| {
            let e = Vec3::new(rng.standard_normal(), rng.standard_normal(), rng.standard_normal());
            let noised = scale * p + spread * e;
            eps.push(e);
            noised
        })
        .collect();
    NoisedExample { x_t, t, eps }
}

fn validation_loss(net: &PointMlpDenoiser, batch: &[NoisedExample]) -> f64 {
    batch.iter().map(|ex| net.loss(&ex.x_t, ex.t, &ex.eps)).sum::<f64>() / batch.len() as f64
}

/// Trains a fresh [`PointMlpDenoiser`] on the clean clouds of `dataset`.
///
/// Batches are processed with data-parallel gradient accumulation in fixed
/// batch order, so results do not depend on worker count. Returns the model
/// and per-epoch loss traces; a non-finite loss aborts with a
/// training-failure error naming the epoch. Zero epochs returns the
/// untouched initialization.
pub fn train_denoiser(
    dataset: &LabeledDataset,
    schedule: &NoiseSchedule,
    training: &DenoiserTraining,
    rng: &mut RngHandle,
) -> Result<(PointMlpDenoiser, TrainingLog)> {
    if training.batch == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    if !(training.learning_rate.is_finite() && training.learning_rate > 0.0) {
        return Err(Error::Config(format!(
            "learning rate must be positive and finite, got {}",
            training.learning_rate
        )));
    }
    let mut net = PointMlpDenoiser::new(training.hyper, schedule.len(), &mut rng.fork(0x1217))?;

    // Fixed validation batch: evenly spaced clouds, noised once.
    let mut val_rng = rng.fork(0x7A11);
    let val_count = VALIDATION_CLOUDS.min(dataset.len());
    let validation: Vec<NoisedExample> = (0..val_count)
        .map(|i| {
            let cloud = &dataset.clouds()[i * dataset.len() / val_count];
            let t = 1 + val_rng.below(schedule.len());
            noise_example(cloud.points(), t, schedule, &mut val_rng)
        })
        .collect();
    let initial_validation_loss = validation_loss(&net, &validation);

    let mut train_losses = Vec::with_capacity(training.epochs);
    let mut validation_losses = Vec::with_capacity(training.epochs);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let param_count = net.parameter_count();

    for epoch in 1..=training.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(training.batch) {
            // Noise draws happen sequentially so the RNG stream is fixed;
            // the heavy forward/backward passes then run in parallel and
            // are reduced in batch order.
            let examples: Vec<NoisedExample> = chunk
                .iter()
                .map(|&i| {
                    let t = 1 + rng.below(schedule.len());
                    noise_example(dataset.clouds()[i].points(), t, schedule, rng)
                })
                .collect();
            let results: Vec<(f64, Vec<f64>)> = examples
                .par_iter()
                .map(|ex| {
                    let mut grad = vec![0.0; param_count];
                    let loss = net.loss_and_gradient(&ex.x_t, ex.t, &ex.eps, &mut grad);
                    (loss, grad)
                })
                .collect();
            let mut grad = vec![0.0; param_count];
            let weight = 1.0 / results.len() as f64;
            for (loss, cloud_grad) in &results {
                epoch_loss += loss;
                for (acc, g) in grad.iter_mut().zip(cloud_grad) {
                    *acc += g * weight;
                }
            }
            clip_gradient(&mut grad, GRAD_CLIP_NORM);
            let params = net.parameters_mut();
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= training.learning_rate * g;
            }
        }
        let mean_train = epoch_loss / dataset.len() as f64;
        let val = validation_loss(&net, &validation);
        if !mean_train.is_finite() || !val.is_finite() {
            return Err(Error::TrainingFailure { epoch });
        }
        train_losses.push(mean_train);
        validation_losses.push(val);
    }
    Ok((net, TrainingLog { initial_validation_loss, train_losses, validation_losses }))
}
