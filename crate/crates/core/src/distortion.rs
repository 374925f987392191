//! Distortion estimation and adaptive timestep selection.
//!
//! The distortion of a point is its distance to the least-squares plane
//! through its K-nearest neighborhood; the distortion of a cloud is the mean
//! over its points. Clean surfaces are locally near-planar, so perturbations
//! — adversarial or random — push the estimate up. A profile of the clean
//! dataset's estimates then maps any cloud's estimate to one of four
//! diffusion depths: barely distorted clouds get shallow noising, heavily
//! distorted ones get the full budget.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::geometry::{fit_plane, knn, point_plane_distance, KdIndex};

/// How a point's distortion is read off its neighborhood plane fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistortionMode {
    /// Distance from the point itself to its neighborhood plane.
    Center,
    /// Sum of distances from every neighborhood member to the plane.
    Sum,
}

/// Estimator settings shared by profiling and per-cloud estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionParams {
    /// Neighborhood size, center included.
    pub k: usize,
    /// Per-point readout.
    pub mode: DistortionMode,
}

impl Default for DistortionParams {
    fn default() -> Self {
        DistortionParams { k: 10, mode: DistortionMode::Center }
    }
}

/// Result of estimating one cloud's distortion.
#[derive(Debug, Clone)]
pub struct DistortionReport {
    /// One score per point, in point order.
    pub per_point: Vec<f64>,
    /// Mean of the per-point scores (the cloud's E_x).
    pub cloud_estimate: f64,
    /// Points whose neighborhood was rank-deficient and scored 0.
    pub degenerate_count: usize,
}

/// Estimates per-point and cloud distortion.
///
/// Needs `3 <= k <= N` so every neighborhood supports a plane fit. Points
/// with a degenerate (all-coincident) neighborhood score 0 and are counted in
/// the report rather than failing the whole cloud.
pub fn estimate_distortion(
    cloud: &PointCloud,
    params: &DistortionParams,
) -> Result<DistortionReport> {
    let n = cloud.len();
    if params.k < 3 || params.k > n {
        return Err(Error::InvalidArgument(format!(
            "distortion estimation needs 3 <= k <= N, got k={} for N={n}",
            params.k
        )));
    }
    let index = KdIndex::build(cloud);
    let scored: Vec<Result<(f64, bool)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let neighborhood = knn(&index, i, params.k)?;
            match fit_plane(cloud, &neighborhood) {
                Ok(plane) => {
                    let score = match params.mode {
                        DistortionMode::Center => point_plane_distance(&cloud.points()[i], &plane),
                        DistortionMode::Sum => plane.residual_sum,
                    };
                    Ok((score, false))
                }
                Err(Error::DegenerateNeighborhood) => Ok((0.0, true)),
                Err(other) => Err(other),
            }
        })
        .collect();

    let mut per_point = Vec::with_capacity(n);
    let mut degenerate_count = 0;
    for item in scored {
        let (score, degenerate) = item?;
        per_point.push(score);
        if degenerate {
            degenerate_count += 1;
        }
    }
    // Fixed-order reduction keeps the estimate independent of thread count.
    let cloud_estimate = per_point.iter().sum::<f64>() / n as f64;
    Ok(DistortionReport { per_point, cloud_estimate, degenerate_count })
}

/// How profile thresholds partition the clean estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdRule {
    /// Quarter the observed value range `[min, max]` into equal-width
    /// intervals. Clean distortion distributions are right-skewed, so the
    /// bulk of clean clouds falls in the low intervals — the behavior the
    /// adaptive defense is built on.
    EqualWidth,
    /// Empirical 25/50/75 percentiles (linear interpolation between order
    /// statistics). Pins a quarter of the profiled mass per interval by
    /// construction.
    Quantile,
}

/// Thresholds and timestep levels derived from a clean dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistortionProfile {
    /// Three ascending cut points over clean-cloud estimates.
    pub thresholds: [f64; 3],
    /// Four ascending diffusion depths; the last equals the configured
    /// maximum.
    pub lambda_levels: [usize; 4],
    /// Number of clouds the profile was computed from.
    pub source_size: usize,
    /// Threshold construction rule.
    pub rule: ThresholdRule,
}

impl DistortionProfile {
    /// True when the profiled estimates could not be split (all thresholds
    /// coincide); selection then falls back to the deepest level.
    pub fn is_degenerate(&self) -> bool {
        self.thresholds[0] == self.thresholds[2]
    }

    /// Largest configured timestep (the last level).
    pub fn lambda_max(&self) -> usize {
        self.lambda_levels[3]
    }
}

/// Linear-interpolation percentile of pre-sorted values, `q` in `[0, 1]`.
fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Cut points splitting `values` into `intervals` buckets under `rule`.
///
/// Returns `intervals - 1` ascending thresholds. Used with 4 intervals for
/// profiles and other counts for stability analysis.
pub fn interval_thresholds(values: &[f64], intervals: usize, rule: ThresholdRule) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("interval thresholds need at least one value".into()));
    }
    if intervals < 2 {
        return Err(Error::InvalidArgument("interval count must be at least 2".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite estimates"));
    let cuts = match rule {
        ThresholdRule::EqualWidth => {
            let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
            (1..intervals).map(|j| min + (max - min) * j as f64 / intervals as f64).collect()
        }
        ThresholdRule::Quantile => {
            (1..intervals).map(|j| percentile_sorted(&sorted, j as f64 / intervals as f64)).collect()
        }
    };
    Ok(cuts)
}

/// The four diffusion depths for a budget `lambda_max`: multiples of
/// `ceil(lambda_max/4)` clipped to the budget, so the final level is always
/// `lambda_max` itself.
fn lambda_levels(lambda_max: usize) -> [usize; 4] {
    let step = lambda_max.div_ceil(4);
    let mut levels = [0usize; 4];
    for (j, level) in levels.iter_mut().enumerate() {
        *level = (step * (j + 1)).min(lambda_max);
    }
    levels
}

/// Builds a profile directly from per-cloud estimates.
pub fn profile_from_estimates(
    estimates: &[f64],
    lambda_max: usize,
    rule: ThresholdRule,
) -> Result<DistortionProfile> {
    if lambda_max < 4 {
        return Err(Error::InvalidArgument(format!("lambda_max must be at least 4, got {lambda_max}")));
    }
    let cuts = interval_thresholds(estimates, 4, rule)?;
    Ok(DistortionProfile {
        thresholds: [cuts[0], cuts[1], cuts[2]],
        lambda_levels: lambda_levels(lambda_max),
        source_size: estimates.len(),
        rule,
    })
}

/// Per-cloud estimates for a whole dataset, in cloud order.
pub fn dataset_estimates(dataset: &LabeledDataset, params: &DistortionParams) -> Result<Vec<f64>> {
    dataset
        .clouds()
        .par_iter()
        .map(|cloud| estimate_distortion(cloud, params).map(|r| r.cloud_estimate))
        .collect()
}

/// Profiles a clean dataset: estimates every cloud, then derives thresholds
/// and the four timestep levels.
pub fn profile_dataset(
    dataset: &LabeledDataset,
    params: &DistortionParams,
    lambda_max: usize,
    rule: ThresholdRule,
) -> Result<DistortionProfile> {
    let estimates = dataset_estimates(dataset, params)?;
    profile_from_estimates(&estimates, lambda_max, rule)
}

/// Maps a cloud's estimate to a diffusion depth.
///
/// Estimates at or below threshold j select level j; anything above the top
/// threshold — and everything, when the profile is degenerate — selects the
/// deepest level.
pub fn select_timestep(estimate: f64, profile: &DistortionProfile) -> usize {
    if profile.is_degenerate() {
        return profile.lambda_levels[3];
    }
    for j in 0..3 {
        if estimate <= profile.thresholds[j] {
            return profile.lambda_levels[j];
        }
    }
    profile.lambda_levels[3]
}

/// Writes a profile as a small TOML document.
pub fn save_profile(profile: &DistortionProfile, path: &Path) -> Result<()> {
    let text = toml::to_string_pretty(profile)
        .map_err(|e| Error::Contract(format!("profile serialization failed: {e}")))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a profile written by [`save_profile`].
pub fn load_profile(path: &Path) -> Result<DistortionProfile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let profile: DistortionProfile =
        toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    if !(profile.thresholds[0] <= profile.thresholds[1] && profile.thresholds[1] <= profile.thresholds[2]) {
        return Err(Error::format(path, "thresholds must be ascending".to_string()));
    }
    Ok(profile)
}
