//! Attacks on the point-set classifier: projected sign-gradient ascent
//! (plain and through a purifier), Gaussian jitter (isotropic and
//! surface-tangent), and saliency-guided point dropping.

use serde::{Deserialize, Serialize};

use super::classifier::ToyClassifier;
use crate::cloud::{PointCloud, Vec3};
use crate::error::{Error, Result};
use crate::geometry::{fit_plane, knn, KdIndex};
use crate::rng::RngHandle;

/// Objective the gradient attacks ascend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackLoss {
    /// Best-wrong-class logit minus true-class logit.
    MaxMargin,
    /// Cross-entropy of the true class.
    CrossEntropy,
}

/// Which gradient attack a config drives (harness dispatch key; the attack
/// functions themselves are chosen by the caller).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackVariant {
    Pgd,
    BpdaPgd,
}

/// Gradient-attack budget and schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackConfig {
    /// L∞ budget per coordinate.
    pub epsilon: f64,
    pub steps: usize,
    pub step_size: f64,
    pub loss: AttackLoss,
    pub variant: AttackVariant,
    /// Points removed by the drop attack.
    pub drop_count: usize,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            epsilon: 0.05,
            steps: 50,
            step_size: 0.007,
            loss: AttackLoss::MaxMargin,
            variant: AttackVariant::Pgd,
            drop_count: 50,
        }
    }
}

impl AttackConfig {
    /// Default purifier-aware configuration: the plain defaults with the
    /// step budget doubled to 100, which compensates for the noisier
    /// straight-through gradients.
    pub fn bpda() -> Self {
        AttackConfig { steps: 100, variant: AttackVariant::BpdaPgd, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::Config(format!(
                "attack epsilon must be finite and nonnegative, got {}",
                self.epsilon
            )));
        }
        if self.steps > 0 && !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::Config(format!(
                "attack step size must be finite and positive, got {}",
                self.step_size
            )));
        }
        Ok(())
    }
}

/// Sign with `sign(0) = 0`, so points with zero gradient stay put.
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Logit-space ascent direction for the configured loss: stepping the input
/// along its pullback increases the attacker's objective.
fn ascent_logit_gradient(logits: &[f64], label: usize, loss: AttackLoss) -> Vec<f64> {
    let mut grad = vec![0.0; logits.len()];
    match loss {
        AttackLoss::MaxMargin => {
            let mut best_wrong = usize::MAX;
            for (c, &z) in logits.iter().enumerate() {
                if c != label && (best_wrong == usize::MAX || z > logits[best_wrong]) {
                    best_wrong = c;
                }
            }
            grad[best_wrong] = 1.0;
            grad[label] = -1.0;
        }
        AttackLoss::CrossEntropy => {
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = logits.iter().map(|z| (z - max).exp()).sum();
            for (g, &z) in grad.iter_mut().zip(logits) {
                *g = (z - max).exp() / sum;
            }
            grad[label] -= 1.0;
        }
    }
    grad
}

/// Label the attacks work against: the cloud's own label, or the model's
/// prediction when the cloud carries none.
fn target_label(model: &ToyClassifier, cloud: &PointCloud) -> usize {
    cloud.label().unwrap_or_else(|| model.predict_class(cloud.points()))
}

/// Shared ascent core. Each step evaluates the gradient at
/// `surrogate(x)` (straight-through: the step applies to `x` itself), moves
/// every coordinate by `step_size · sign(g)`, and clamps back into the L∞
/// ball around the original points.
fn ascend<F>(
    model: &ToyClassifier,
    original: &[Vec3],
    label: usize,
    config: &AttackConfig,
    mut surrogate: F,
) -> Result<Vec<Vec3>>
where
    F: FnMut(&[Vec3]) -> Result<Vec<Vec3>>,
{
    let mut x = original.to_vec();
    for _ in 0..config.steps {
        let forward = surrogate(&x)?;
        if forward.len() != x.len() {
            return Err(Error::Contract(format!(
                "purifier changed the point count from {} to {}",
                x.len(),
                forward.len()
            )));
        }
        let logit_grad = ascent_logit_gradient(&model.logits(&forward), label, config.loss);
        let point_grad = model.input_gradient(&forward, &logit_grad);
        for ((p, g), o) in x.iter_mut().zip(&point_grad).zip(original) {
            for axis in 0..3 {
                let lo = o[axis] - config.epsilon;
                let hi = o[axis] + config.epsilon;
                p[axis] = (p[axis] + config.step_size * sign(g[axis])).clamp(lo, hi);
            }
        }
        debug_assert!(x
            .iter()
            .zip(original)
            .all(|(p, o)| (p - o).amax() <= config.epsilon + 1e-9));
    }
    Ok(x)
}

/// Projected sign-gradient ascent on the classifier loss within an L∞ ball
/// of radius `config.epsilon` around `cloud`.
///
/// Deterministic: the perturbation starts at zero and the RNG is reserved
/// for randomized variants, which never draw from it here.
pub fn pgd_attack(
    model: &ToyClassifier,
    cloud: &PointCloud,
    config: &AttackConfig,
    _rng: &mut RngHandle,
) -> Result<PointCloud> {
    config.validate()?;
    let label = target_label(model, cloud);
    let adv = ascend(model, cloud.points(), label, config, |x| Ok(x.to_vec()))?;
    cloud.like(adv)
}

/// PGD through a purifying preprocessor: the forward pass classifies
/// `purify_fn(x)`, the backward pass treats the purifier's Jacobian as the
/// identity, and the step/projection contract matches [`pgd_attack`].
///
/// `purify_fn` must preserve point count and order; a count change is a
/// contract error.
pub fn bpda_pgd_attack<F>(
    model: &ToyClassifier,
    mut purify_fn: F,
    cloud: &PointCloud,
    config: &AttackConfig,
    _rng: &mut RngHandle,
) -> Result<PointCloud>
where
    F: FnMut(&[Vec3]) -> Result<Vec<Vec3>>,
{
    config.validate()?;
    let label = target_label(model, cloud);
    let adv = ascend(model, cloud.points(), label, config, &mut purify_fn)?;
    cloud.like(adv)
}

/// Adds isotropic Gaussian noise `σ·N(0, I)` to every point.
pub fn jitter_attack(cloud: &PointCloud, sigma: f64, rng: &mut RngHandle) -> Result<PointCloud> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "jitter sigma must be finite and nonnegative, got {sigma}"
        )));
    }
    let points = cloud
        .points()
        .iter()
        .map(|p| {
            let g = Vec3::new(rng.standard_normal(), rng.standard_normal(), rng.standard_normal());
            p + sigma * g
        })
        .collect();
    cloud.like(points)
}

/// Gaussian jitter constrained to the local surface: each point's offset is
/// projected onto the plane fitted through its `k`-neighborhood of the
/// original cloud, so the displacement slides along the surface instead of
/// leaving it.
///
/// Draws the same Gaussian stream as [`jitter_attack`] (three normals per
/// point) regardless of the fit outcome; a degenerate neighborhood
/// contributes a zero offset.
pub fn tangent_jitter(
    cloud: &PointCloud,
    sigma: f64,
    k: usize,
    rng: &mut RngHandle,
) -> Result<PointCloud> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "jitter sigma must be finite and nonnegative, got {sigma}"
        )));
    }
    let index = KdIndex::build(cloud);
    let mut points = Vec::with_capacity(cloud.len());
    for (i, p) in cloud.points().iter().enumerate() {
        let g = Vec3::new(rng.standard_normal(), rng.standard_normal(), rng.standard_normal());
        let offset = sigma * g;
        let in_plane = match fit_plane(cloud, &knn(&index, i, k)?) {
            Ok(plane) => offset - plane.normal * offset.dot(&plane.normal),
            Err(Error::DegenerateNeighborhood) => Vec3::zeros(),
            Err(other) => return Err(other),
        };
        points.push(p + in_plane);
    }
    cloud.like(points)
}

/// Removes the `drop_count` points whose true-class logit is most sensitive
/// to them — saliency is the norm of the logit's gradient with respect to
/// the point, so only max-pool winners score above zero. Ties break toward
/// dropping the lower index; survivors keep their order.
pub fn drop_attack(
    model: &ToyClassifier,
    cloud: &PointCloud,
    drop_count: usize,
) -> Result<PointCloud> {
    let n = cloud.len();
    if drop_count >= n {
        return Err(Error::InvalidArgument(format!(
            "cannot drop {drop_count} of {n} points"
        )));
    }
    if drop_count == 0 {
        return Ok(cloud.clone());
    }
    let label = target_label(model, cloud);
    let mut logit_weights = vec![0.0; model.classes()];
    logit_weights[label] = 1.0;
    let grads = model.input_gradient(cloud.points(), &logit_weights);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        grads[b].norm().partial_cmp(&grads[a].norm()).expect("finite saliency").then(a.cmp(&b))
    });
    let mut dropped = vec![false; n];
    for &i in &order[..drop_count] {
        dropped[i] = true;
    }
    let survivors = cloud
        .points()
        .iter()
        .enumerate()
        .filter(|(i, _)| !dropped[*i])
        .map(|(_, p)| *p)
        .collect();
    cloud.like(survivors)
}
