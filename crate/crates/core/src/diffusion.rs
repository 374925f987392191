//! DDPM noise schedule, forward/reverse chains, and the multi-round
//! adaptive purification loop.
//!
//! Forward diffusion blends a cloud toward an isotropic Gaussian:
//! `x_λ = √ᾱ_λ·x_0 + √(1−ᾱ_λ)·ε`. The reverse chain walks back one timestep
//! at a time, subtracting the denoiser's noise prediction. Purification
//! estimates a cloud's distortion, picks a diffusion depth from a clean-data
//! profile, and runs one forward/reverse pass per round — heavier distortion
//! earns deeper noising.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::cloud::{PointCloud, Vec3};
use crate::denoiser::Denoiser;
use crate::distortion::{
    estimate_distortion, select_timestep, DistortionMode, DistortionParams, DistortionProfile,
};
use crate::error::{Error, Result};
use crate::geometry::chamfer_distance;
use crate::rng::RngHandle;

/// Reverse-step noise scale rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaRule {
    /// σ_t = √β_t.
    Beta,
    /// σ_t = √β̃_t with β̃_t = (1−ᾱ_{t−1})/(1−ᾱ_t)·β_t, the true posterior
    /// variance; zero at t=1.
    PosteriorBeta,
}

/// Precomputed β/α/ᾱ/σ sequences for a `T`-step chain.
///
/// Sequences are indexed by timestep `t ∈ [1, T]` through the accessor
/// methods; `alpha_bar(0)` is defined as 1 so timestep 0 means "no noise".
#[derive(Debug, Clone)]
pub struct NoiseSchedule {
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
    sigma: Vec<f64>,
    sigma_rule: SigmaRule,
}

impl NoiseSchedule {
    /// Total timestep count `T`.
    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    /// β_t for `t ∈ [1, T]`.
    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t - 1]
    }

    /// α_t = 1 − β_t for `t ∈ [1, T]`.
    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t - 1]
    }

    /// ᾱ_t = Π_{i≤t} α_i for `t ∈ [0, T]`; ᾱ_0 = 1.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.alpha_bar[t - 1]
        }
    }

    /// σ_t per the schedule's rule, for `t ∈ [1, T]`.
    pub fn sigma(&self, t: usize) -> f64 {
        self.sigma[t - 1]
    }

    pub fn sigma_rule(&self) -> SigmaRule {
        self.sigma_rule
    }
}

/// Builds a linear β schedule inclusive of both endpoints.
///
/// Needs `0 < beta_start <= beta_end < 1` and `t_total >= 1`. A single-step
/// schedule uses β_1 = beta_start.
pub fn make_schedule(
    t_total: usize,
    beta_start: f64,
    beta_end: f64,
    sigma_rule: SigmaRule,
) -> Result<NoiseSchedule> {
    if t_total == 0 {
        return Err(Error::Config("schedule needs at least one timestep".into()));
    }
    if !(0.0 < beta_start && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::Config(format!(
            "beta range must satisfy 0 < start <= end < 1, got ({beta_start}, {beta_end})"
        )));
    }
    let beta: Vec<f64> = if t_total == 1 {
        vec![beta_start]
    } else {
        (0..t_total)
            .map(|i| beta_start + (beta_end - beta_start) * i as f64 / (t_total - 1) as f64)
            .collect()
    };
    let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
    let mut alpha_bar = Vec::with_capacity(t_total);
    let mut product = 1.0;
    for a in &alpha {
        product *= a;
        alpha_bar.push(product);
    }
    let sigma: Vec<f64> = match sigma_rule {
        SigmaRule::Beta => beta.iter().map(|b| b.sqrt()).collect(),
        SigmaRule::PosteriorBeta => (0..t_total)
            .map(|i| {
                let prev_bar = if i == 0 { 1.0 } else { alpha_bar[i - 1] };
                ((1.0 - prev_bar) / (1.0 - alpha_bar[i]) * beta[i]).sqrt()
            })
            .collect(),
    };
    Ok(NoiseSchedule { beta, alpha, alpha_bar, sigma, sigma_rule })
}

fn check_timestep(lambda: usize, schedule: &NoiseSchedule) -> Result<()> {
    if lambda > schedule.len() {
        return Err(Error::InvalidArgument(format!(
            "timestep {lambda} exceeds schedule length {}",
            schedule.len()
        )));
    }
    Ok(())
}

fn diffuse_with<F: FnMut() -> f64>(
    cloud: &PointCloud,
    lambda: usize,
    schedule: &NoiseSchedule,
    mut noise: F,
) -> Result<PointCloud> {
    check_timestep(lambda, schedule)?;
    if lambda == 0 {
        return Ok(cloud.clone());
    }
    let scale = schedule.alpha_bar(lambda).sqrt();
    let spread = (1.0 - schedule.alpha_bar(lambda)).sqrt();
    let points = cloud
        .points()
        .iter()
        .map(|p| {
            Vec3::new(
                scale * p.x + spread * noise(),
                scale * p.y + spread * noise(),
                scale * p.z + spread * noise(),
            )
        })
        .collect();
    cloud.like(points)
}

/// Samples `x_λ = √ᾱ_λ·x_0 + √(1−ᾱ_λ)·ε` with i.i.d. standard-normal ε.
/// `lambda = 0` returns the input unchanged.
pub fn forward_diffuse(
    cloud: &PointCloud,
    lambda: usize,
    schedule: &NoiseSchedule,
    rng: &mut RngHandle,
) -> Result<PointCloud> {
    diffuse_with(cloud, lambda, schedule, || rng.standard_normal())
}

/// Whether the budget condition uses a one- or two-sided normal quantile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BudgetSide {
    OneSided,
    TwoSided,
}

/// Result of the budget-derived maximum-timestep rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BudgetTimestep {
    /// Smallest admissible λ, or `T` when saturated.
    pub lambda: usize,
    /// True when no timestep satisfied the condition and `T` was returned.
    pub saturated: bool,
}

/// Smallest λ whose injected noise dominates the perturbation budget:
/// `√(1−ᾱ_λ)·z(confidence) ≥ √ᾱ_λ·budget`.
///
/// Returns `T` with the `saturated` flag when even the final timestep fails
/// the condition.
pub fn max_timestep_from_budget(
    budget: f64,
    confidence: f64,
    side: BudgetSide,
    schedule: &NoiseSchedule,
) -> Result<BudgetTimestep> {
    if budget < 0.0 {
        return Err(Error::InvalidArgument(format!("budget must be nonnegative, got {budget}")));
    }
    if !(0.5 < confidence && confidence < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence must lie in (0.5, 1), got {confidence}"
        )));
    }
    let p = match side {
        BudgetSide::OneSided => confidence,
        BudgetSide::TwoSided => 0.5 + confidence / 2.0,
    };
    let z = Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(p);
    // The condition rearranges to ᾱ_λ ≤ z²/(z² + budget²); ᾱ is strictly
    // decreasing, so the first hit is the answer.
    let threshold = z * z / (z * z + budget * budget);
    for lambda in 1..=schedule.len() {
        if schedule.alpha_bar(lambda) <= threshold {
            return Ok(BudgetTimestep { lambda, saturated: false });
        }
    }
    Ok(BudgetTimestep { lambda: schedule.len(), saturated: true })
}

/// Runs the reverse chain from timestep `lambda` down to 0.
///
/// Each step computes
/// `x_{t−1} = (x_t − (β_t/√(1−ᾱ_t))·ε̂(x_t, t)) / √α_t + σ_t·z`,
/// with fresh z ~ N(0, I) for t > 1 and z = 0 at the final step.
/// `lambda = 0` returns the input unchanged.
pub fn reverse_denoise(
    noisy: &PointCloud,
    lambda: usize,
    denoiser: &dyn Denoiser,
    schedule: &NoiseSchedule,
    rng: &mut RngHandle,
) -> Result<PointCloud> {
    check_timestep(lambda, schedule)?;
    let n = noisy.len();
    let mut current: Vec<Vec3> = noisy.points().to_vec();
    for t in (1..=lambda).rev() {
        let predicted = denoiser.predict(&current, t);
        if predicted.len() != n {
            return Err(Error::Contract(format!(
                "denoiser returned {} predictions for {n} points",
                predicted.len()
            )));
        }
        let alpha = schedule.alpha(t);
        let eps_weight = schedule.beta(t) / (1.0 - schedule.alpha_bar(t)).sqrt();
        let sigma = if t > 1 { schedule.sigma(t) } else { 0.0 };
        for (point, eps) in current.iter_mut().zip(&predicted) {
            let mut next = (*point - eps_weight * eps) / alpha.sqrt();
            if sigma > 0.0 {
                next += sigma
                    * Vec3::new(rng.standard_normal(), rng.standard_normal(), rng.standard_normal());
            }
            *point = next;
        }
    }
    noisy.like(current)
}

/// Settings for the multi-round adaptive purifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurifierConfig {
    /// Forward/reverse passes to run; at least 1.
    pub rounds: usize,
    /// Deepest allowed timestep; must equal the profile's top level and fit
    /// the schedule.
    pub lambda_max: usize,
    /// Neighborhood size for the per-round distortion estimate.
    pub k: usize,
    /// Distortion readout for the per-round estimate.
    pub mode: DistortionMode,
    /// Perturbation budget the deployment assumes; informational here, used
    /// when deriving `lambda_max` from the budget rule.
    pub budget: f64,
    /// Confidence level paired with `budget`.
    pub confidence: f64,
    /// Re-estimate distortion each round (default); when false, the round-1
    /// selection is reused for every round.
    pub reestimate_each_round: bool,
}

impl Default for PurifierConfig {
    fn default() -> Self {
        PurifierConfig {
            rounds: 4,
            lambda_max: 20,
            k: 10,
            mode: DistortionMode::Center,
            budget: 0.05,
            confidence: 0.988,
            reestimate_each_round: true,
        }
    }
}

impl PurifierConfig {
    fn validate(&self, profile: &DistortionProfile, schedule: &NoiseSchedule) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::InvalidArgument("purifier needs at least one round".into()));
        }
        if self.lambda_max > schedule.len() {
            return Err(Error::InvalidArgument(format!(
                "lambda_max {} exceeds schedule length {}",
                self.lambda_max,
                schedule.len()
            )));
        }
        if self.lambda_max != profile.lambda_max() {
            return Err(Error::InvalidArgument(format!(
                "lambda_max {} does not match the profile's top level {}",
                self.lambda_max,
                profile.lambda_max()
            )));
        }
        if self.budget < 0.0 {
            return Err(Error::InvalidArgument("budget must be nonnegative".into()));
        }
        if !(0.5 < self.confidence && self.confidence < 1.0) {
            return Err(Error::InvalidArgument("confidence must lie in (0.5, 1)".into()));
        }
        Ok(())
    }
}

/// One purification round's log entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundRecord {
    /// 1-based round number.
    pub round: usize,
    /// Distortion estimate used for this round's selection. When
    /// re-estimation is disabled, rounds after the first repeat the round-1
    /// value.
    pub e_x: f64,
    /// Selected diffusion depth.
    pub lambda: usize,
    /// Chamfer distance from this round's output back to the purifier input.
    pub chamfer_to_input: f64,
}

/// Adaptive purification: per round, estimate distortion, select a timestep
/// from the profile, forward-diffuse, and denoise back. Returns the purified
/// cloud and one record per round. Point count and order are preserved.
pub fn purify(
    cloud: &PointCloud,
    profile: &DistortionProfile,
    denoiser: &dyn Denoiser,
    schedule: &NoiseSchedule,
    config: &PurifierConfig,
    rng: &mut RngHandle,
) -> Result<(PointCloud, Vec<RoundRecord>)> {
    config.validate(profile, schedule)?;
    let params = DistortionParams { k: config.k, mode: config.mode };
    let mut current = cloud.clone();
    let mut records = Vec::with_capacity(config.rounds);
    let mut frozen: Option<(f64, usize)> = None;
    for round in 1..=config.rounds {
        let (e_x, lambda) = match frozen {
            Some(pair) if !config.reestimate_each_round => pair,
            _ => {
                let e_x = estimate_distortion(&current, &params)?.cloud_estimate;
                (e_x, select_timestep(e_x, profile))
            }
        };
        frozen.get_or_insert((e_x, lambda));
        let noisy = forward_diffuse(&current, lambda, schedule, rng)?;
        current = reverse_denoise(&noisy, lambda, denoiser, schedule, rng)?;
        records.push(RoundRecord {
            round,
            e_x,
            lambda,
            chamfer_to_input: chamfer_distance(&current, cloud),
        });
    }
    Ok((current, records))
}

/// Fixed-depth purification: every round diffuses to `lambda` regardless of
/// distortion. `lambda = 0` returns the input unchanged — exactly the
/// no-defense baseline.
pub fn purify_fixed(
    cloud: &PointCloud,
    lambda: usize,
    rounds: usize,
    denoiser: &dyn Denoiser,
    schedule: &NoiseSchedule,
    rng: &mut RngHandle,
) -> Result<PointCloud> {
    if rounds == 0 {
        return Err(Error::InvalidArgument("purifier needs at least one round".into()));
    }
    check_timestep(lambda, schedule)?;
    if lambda == 0 {
        return Ok(cloud.clone());
    }
    let mut current = cloud.clone();
    for _ in 0..rounds {
        let noisy = forward_diffuse(&current, lambda, schedule, rng)?;
        current = reverse_denoise(&noisy, lambda, denoiser, schedule, rng)?;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distortion::{profile_from_estimates, ThresholdRule};
    use std::sync::atomic::{AtomicUsize, Ordering};

    /// Predicts zero noise everywhere.
    struct ZeroDenoiser;

    impl Denoiser for ZeroDenoiser {
        fn predict(&self, x_t: &[Vec3], _t: usize) -> Vec<Vec3> {
            vec![Vec3::zeros(); x_t.len()]
        }
    }

    /// Counts predict calls; wraps zero prediction.
    struct CountingDenoiser(AtomicUsize);

    impl Denoiser for CountingDenoiser {
        fn predict(&self, x_t: &[Vec3], _t: usize) -> Vec<Vec3> {
            self.0.fetch_add(1, Ordering::Relaxed);
            vec![Vec3::zeros(); x_t.len()]
        }
    }

    /// Returns the wrong number of predictions.
    struct BrokenDenoiser;

    impl Denoiser for BrokenDenoiser {
        fn predict(&self, x_t: &[Vec3], _t: usize) -> Vec<Vec3> {
            vec![Vec3::zeros(); x_t.len() + 1]
        }
    }

    fn default_schedule() -> NoiseSchedule {
        make_schedule(200, 1e-4, 0.02, SigmaRule::Beta).unwrap()
    }

    fn grid_cloud(side: usize) -> PointCloud {
        let mut points = Vec::new();
        for i in 0..side {
            for j in 0..side {
                points.push(Vec3::new(i as f64 * 0.1, j as f64 * 0.1, 0.0));
            }
        }
        PointCloud::new(points).unwrap()
    }

    #[test]
    fn single_step_schedule() {
        let schedule = make_schedule(1, 0.02, 0.02, SigmaRule::Beta).unwrap();
        assert_eq!(schedule.len(), 1);
        assert!((schedule.alpha_bar(1) - 0.98).abs() < 1e-15);
        assert_eq!(schedule.alpha_bar(0), 1.0);
    }

    #[test]
    fn alpha_bar_matches_brute_force_product() {
        let schedule = default_schedule();
        let mut product = 1.0;
        for t in 1..=200 {
            product *= 1.0 - schedule.beta(t);
            assert!((schedule.alpha_bar(t) - product).abs() < 1e-12, "t={t}");
        }
        assert!((schedule.beta(1) - 1e-4).abs() < 1e-15);
        assert!((schedule.beta(200) - 0.02).abs() < 1e-15);
    }

    #[test]
    fn alpha_bar_strictly_decreasing_in_unit_interval() {
        let schedule = default_schedule();
        for t in 1..=200 {
            assert!(schedule.alpha_bar(t) > 0.0 && schedule.alpha_bar(t) <= 1.0);
            assert!(schedule.alpha_bar(t) < schedule.alpha_bar(t - 1));
        }
    }

    #[test]
    fn invalid_beta_ranges_rejected() {
        assert!(make_schedule(10, 1e-4, 1.0, SigmaRule::Beta).is_err());
        assert!(make_schedule(10, 0.0, 0.02, SigmaRule::Beta).is_err());
        assert!(make_schedule(10, 0.02, 0.01, SigmaRule::Beta).is_err());
        assert!(make_schedule(0, 1e-4, 0.02, SigmaRule::Beta).is_err());
    }

    #[test]
    fn sigma_rules() {
        let simple = default_schedule();
        for t in 1..=200 {
            assert!((simple.sigma(t) - simple.beta(t).sqrt()).abs() < 1e-15);
        }
        let posterior = make_schedule(200, 1e-4, 0.02, SigmaRule::PosteriorBeta).unwrap();
        assert_eq!(posterior.sigma(1), 0.0);
        for t in 2..=200 {
            let expected = ((1.0 - posterior.alpha_bar(t - 1)) / (1.0 - posterior.alpha_bar(t))
                * posterior.beta(t))
            .sqrt();
            assert!((posterior.sigma(t) - expected).abs() < 1e-15);
            assert!(posterior.sigma(t) < simple.sigma(t));
        }
    }

    #[test]
    fn forward_zero_timestep_is_identity() {
        let cloud = grid_cloud(4);
        let schedule = default_schedule();
        let mut rng = RngHandle::new(3);
        let out = forward_diffuse(&cloud, 0, &schedule, &mut rng).unwrap();
        assert_eq!(out, cloud);
    }

    #[test]
    fn forward_with_silenced_noise_is_pure_scaling() {
        let cloud = grid_cloud(4);
        let schedule = default_schedule();
        let out = diffuse_with(&cloud, 20, &schedule, || 0.0).unwrap();
        let scale = schedule.alpha_bar(20).sqrt();
        for (a, b) in cloud.points().iter().zip(out.points()) {
            assert_eq!(a * scale, *b);
        }
    }

    #[test]
    fn forward_rejects_timestep_beyond_schedule() {
        let cloud = grid_cloud(2);
        let schedule = default_schedule();
        let mut rng = RngHandle::new(3);
        assert!(matches!(
            forward_diffuse(&cloud, 201, &schedule, &mut rng),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn forward_moments_match_the_marginal() {
        let schedule = default_schedule();
        let cloud = PointCloud::new(vec![Vec3::zeros()]).unwrap();
        let mut rng = RngHandle::new(11);
        let trials = 10_000;
        let mut sums = Vec3::zeros();
        let mut sq_sums = Vec3::zeros();
        for _ in 0..trials {
            let out = forward_diffuse(&cloud, 20, &schedule, &mut rng).unwrap();
            let p = out.points()[0];
            sums += p;
            sq_sums += p.component_mul(&p);
        }
        let n = trials as f64;
        let target_var = 1.0 - schedule.alpha_bar(20);
        let mean_bound = 4.0 * (target_var / n).sqrt();
        for axis in 0..3 {
            let mean = sums[axis] / n;
            let var = sq_sums[axis] / n - mean * mean;
            assert!(mean.abs() < mean_bound, "axis {axis} mean {mean:.5} bound {mean_bound:.5}");
            assert!((var / target_var - 1.0).abs() < 0.05, "axis {axis} var {var:.6} target {target_var:.6}");
        }
    }

    #[test]
    fn stepwise_composition_matches_the_marginal() {
        // Diffuse to s via the marginal, then continue to t one conditional
        // step at a time: x_j = √α_j·x_{j−1} + √β_j·ε. The end distribution
        // must match the direct marginal at t.
        let schedule = default_schedule();
        let x0 = Vec3::new(0.3, -0.2, 0.5);
        let (s, t) = (10, 20);
        let mut rng = RngHandle::new(29);
        let trials = 10_000;
        let mut sums = Vec3::zeros();
        let mut sq_sums = Vec3::zeros();
        for _ in 0..trials {
            let cloud = PointCloud::new(vec![x0]).unwrap();
            let mut point = forward_diffuse(&cloud, s, &schedule, &mut rng).unwrap().points()[0];
            for j in (s + 1)..=t {
                let noise =
                    Vec3::new(rng.standard_normal(), rng.standard_normal(), rng.standard_normal());
                point = schedule.alpha(j).sqrt() * point + schedule.beta(j).sqrt() * noise;
            }
            sums += point;
            sq_sums += point.component_mul(&point);
        }
        let n = trials as f64;
        let target_mean = schedule.alpha_bar(t).sqrt() * x0;
        let target_var = 1.0 - schedule.alpha_bar(t);
        for axis in 0..3 {
            let mean = sums[axis] / n;
            let var = sq_sums[axis] / n - mean * mean;
            assert!(
                (mean - target_mean[axis]).abs() < 4.0 * (target_var / n).sqrt(),
                "axis {axis} mean {mean:.5} target {:.5}",
                target_mean[axis]
            );
            assert!((var / target_var - 1.0).abs() < 0.05, "axis {axis}");
        }
    }

    #[test]
    fn budget_zero_selects_first_timestep() {
        let schedule = default_schedule();
        let result =
            max_timestep_from_budget(0.0, 0.988, BudgetSide::OneSided, &schedule).unwrap();
        assert_eq!(result, BudgetTimestep { lambda: 1, saturated: false });
    }

    #[test]
    fn budget_rule_matches_direct_inequality_scan() {
        let schedule = default_schedule();
        let z = Normal::new(0.0, 1.0).unwrap().inverse_cdf(0.988);
        for budget in [0.01, 0.05, 0.1, 0.3, 1.0, 3.0] {
            let got = max_timestep_from_budget(budget, 0.988, BudgetSide::OneSided, &schedule)
                .unwrap();
            let scan = (1..=schedule.len()).find(|&lambda| {
                (1.0 - schedule.alpha_bar(lambda)).sqrt() * z
                    >= schedule.alpha_bar(lambda).sqrt() * budget
            });
            match scan {
                Some(lambda) => assert_eq!(got, BudgetTimestep { lambda, saturated: false }, "budget {budget}"),
                None => assert_eq!(
                    got,
                    BudgetTimestep { lambda: schedule.len(), saturated: true },
                    "budget {budget}"
                ),
            }
        }
    }

    #[test]
    fn budget_rule_is_monotone_and_saturates() {
        let schedule = default_schedule();
        let mut last = 0;
        for step in 0..60 {
            let budget = step as f64 * 0.25;
            let got = max_timestep_from_budget(budget, 0.988, BudgetSide::OneSided, &schedule)
                .unwrap();
            assert!(got.lambda >= last);
            last = got.lambda;
        }
        // A budget far beyond the schedule's total noise saturates at T.
        let extreme =
            max_timestep_from_budget(1e6, 0.988, BudgetSide::OneSided, &schedule).unwrap();
        assert_eq!(extreme.lambda, schedule.len());
        assert!(extreme.saturated);
    }

    #[test]
    fn two_sided_budget_uses_larger_quantile() {
        // z((1+c)/2) > z(c), so the noise-dominance condition is met at the
        // same or an earlier timestep under the two-sided reading.
        let schedule = default_schedule();
        let one = max_timestep_from_budget(0.5, 0.988, BudgetSide::OneSided, &schedule).unwrap();
        let two = max_timestep_from_budget(0.5, 0.988, BudgetSide::TwoSided, &schedule).unwrap();
        assert!(two.lambda <= one.lambda);
        assert!(one.lambda > 1, "budget 0.5 should need several steps");
    }

    #[test]
    fn reverse_zero_timestep_is_identity() {
        let cloud = grid_cloud(3);
        let schedule = default_schedule();
        let mut rng = RngHandle::new(5);
        let out = reverse_denoise(&cloud, 0, &ZeroDenoiser, &schedule, &mut rng).unwrap();
        assert_eq!(out, cloud);
    }

    #[test]
    fn reverse_single_step_with_zero_prediction_is_pure_rescale() {
        let cloud = grid_cloud(3);
        let schedule = default_schedule();
        let mut rng = RngHandle::new(5);
        let out = reverse_denoise(&cloud, 1, &ZeroDenoiser, &schedule, &mut rng).unwrap();
        let scale = 1.0 / schedule.alpha(1).sqrt();
        for (a, b) in cloud.points().iter().zip(out.points()) {
            assert_eq!(a / schedule.alpha(1).sqrt(), *b);
            assert!((b - a * scale).norm() < 1e-15);
        }
    }

    #[test]
    fn reverse_detects_shape_mismatch() {
        let cloud = grid_cloud(3);
        let schedule = default_schedule();
        let mut rng = RngHandle::new(5);
        assert!(matches!(
            reverse_denoise(&cloud, 5, &BrokenDenoiser, &schedule, &mut rng),
            Err(Error::Contract(_))
        ));
    }

    fn test_profile() -> DistortionProfile {
        profile_from_estimates(&[0.01, 0.02, 0.03, 0.04], 20, ThresholdRule::EqualWidth).unwrap()
    }

    #[test]
    fn purify_preserves_count_and_runs_lambda1_steps_on_near_planar_input() {
        let cloud = grid_cloud(5);
        let schedule = default_schedule();
        let profile = test_profile();
        let config = PurifierConfig { rounds: 1, ..Default::default() };
        let counter = CountingDenoiser(AtomicUsize::new(0));
        let mut rng = RngHandle::new(8);
        let (out, records) =
            purify(&cloud, &profile, &counter, &schedule, &config, &mut rng).unwrap();
        assert_eq!(out.len(), cloud.len());
        assert_eq!(records.len(), 1);
        // A coplanar grid scores E_x = 0, below the lowest threshold.
        assert_eq!(records[0].lambda, profile.lambda_levels[0]);
        assert_eq!(records[0].e_x, 0.0);
        // One reverse step per timestep of the selected depth.
        assert_eq!(counter.0.load(Ordering::Relaxed), profile.lambda_levels[0]);
    }

    #[test]
    fn purify_is_deterministic_for_a_fixed_seed() {
        let cloud = grid_cloud(5);
        let schedule = default_schedule();
        let profile = test_profile();
        let config = PurifierConfig::default();
        let run = || {
            let mut rng = RngHandle::new(99);
            purify(&cloud, &profile, &ZeroDenoiser, &schedule, &config, &mut rng).unwrap()
        };
        let (out_a, rec_a) = run();
        let (out_b, rec_b) = run();
        assert_eq!(out_a, out_b);
        assert_eq!(rec_a, rec_b);
    }

    #[test]
    fn purify_without_reestimation_freezes_the_first_selection() {
        let cloud = grid_cloud(5);
        let schedule = default_schedule();
        let profile = test_profile();
        let config =
            PurifierConfig { rounds: 3, reestimate_each_round: false, ..Default::default() };
        let mut rng = RngHandle::new(12);
        let (_, records) =
            purify(&cloud, &profile, &ZeroDenoiser, &schedule, &config, &mut rng).unwrap();
        assert!(records.iter().all(|r| r.lambda == records[0].lambda));
        assert!(records.iter().all(|r| r.e_x == records[0].e_x));
        // With re-estimation on, later rounds measure the noised-and-denoised
        // cloud, which is no longer coplanar.
        let config_on = PurifierConfig { rounds: 3, ..Default::default() };
        let mut rng = RngHandle::new(12);
        let (_, records_on) =
            purify(&cloud, &profile, &ZeroDenoiser, &schedule, &config_on, &mut rng).unwrap();
        assert!(records_on[1].e_x > 0.0);
    }

    #[test]
    fn purify_validates_config() {
        let cloud = grid_cloud(3);
        let schedule = default_schedule();
        let profile = test_profile();
        let mut rng = RngHandle::new(1);
        let bad_rounds = PurifierConfig { rounds: 0, ..Default::default() };
        assert!(purify(&cloud, &profile, &ZeroDenoiser, &schedule, &bad_rounds, &mut rng).is_err());
        let bad_lambda = PurifierConfig { lambda_max: 19, ..Default::default() };
        assert!(purify(&cloud, &profile, &ZeroDenoiser, &schedule, &bad_lambda, &mut rng).is_err());
        let bad_conf = PurifierConfig { confidence: 0.4, ..Default::default() };
        assert!(purify(&cloud, &profile, &ZeroDenoiser, &schedule, &bad_conf, &mut rng).is_err());
    }

    #[test]
    fn fixed_lambda_zero_is_exactly_no_defense() {
        let cloud = grid_cloud(4);
        let schedule = default_schedule();
        let mut rng = RngHandle::new(77);
        let out = purify_fixed(&cloud, 0, 4, &ZeroDenoiser, &schedule, &mut rng).unwrap();
        assert_eq!(out, cloud);
        assert!(purify_fixed(&cloud, 0, 0, &ZeroDenoiser, &schedule, &mut rng).is_err());
    }

    #[test]
    fn shallow_purification_is_less_destructive_than_deep() {
        let schedule = default_schedule();
        let mut sum_shallow = 0.0;
        let mut sum_deep = 0.0;
        for seed in 0..50u64 {
            let mut jitter_rng = RngHandle::new(1000 + seed);
            let points = grid_cloud(6)
                .points()
                .iter()
                .map(|p| {
                    Vec3::new(
                        p.x + 0.002 * jitter_rng.standard_normal(),
                        p.y + 0.002 * jitter_rng.standard_normal(),
                        p.z + 0.002 * jitter_rng.standard_normal(),
                    )
                })
                .collect();
            let cloud = PointCloud::new(points).unwrap();
            let mut rng_a = RngHandle::new(2000 + seed);
            let shallow = purify_fixed(&cloud, 5, 1, &ZeroDenoiser, &schedule, &mut rng_a).unwrap();
            let mut rng_b = RngHandle::new(3000 + seed);
            let deep = purify_fixed(&cloud, 20, 1, &ZeroDenoiser, &schedule, &mut rng_b).unwrap();
            sum_shallow += chamfer_distance(&shallow, &cloud);
            sum_deep += chamfer_distance(&deep, &cloud);
        }
        assert!(
            sum_shallow < sum_deep,
            "shallow {sum_shallow:.6} should be below deep {sum_deep:.6}"
        );
    }
}
