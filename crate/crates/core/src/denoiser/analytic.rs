//! Closed-form noise predictor for Gaussian data.
//!
//! When the clean data is exactly `x_0 ~ N(μ, var·I)`, the posterior
//! expectation of the noise that produced `x_t = √ᾱ_t·x_0 + √(1−ᾱ_t)·ε`
//! has the closed form
//! `ε̂(x_t, t) = √(1−ᾱ_t)·(x_t − √ᾱ_t·μ) / (ᾱ_t·var + 1 − ᾱ_t)`.
//! This gives the reverse chain an exact oracle to be validated against.

use crate::cloud::Vec3;
use crate::denoiser::Denoiser;
use crate::diffusion::NoiseSchedule;

/// Exact ε-predictor for `x_0 ~ N(mu, var·I)` data.
#[derive(Debug, Clone)]
pub struct AnalyticGaussianDenoiser {
    mu: Vec3,
    var: f64,
    schedule: NoiseSchedule,
}

impl AnalyticGaussianDenoiser {
    /// Requires `var > 0`.
    pub fn new(mu: Vec3, var: f64, schedule: NoiseSchedule) -> Self {
        assert!(var > 0.0, "target variance must be positive");
        AnalyticGaussianDenoiser { mu, var, schedule }
    }

    pub fn mu(&self) -> Vec3 {
        self.mu
    }

    pub fn var(&self) -> f64 {
        self.var
    }
}

impl Denoiser for AnalyticGaussianDenoiser {
    fn predict(&self, x_t: &[Vec3], t: usize) -> Vec<Vec3> {
        let alpha_bar = self.schedule.alpha_bar(t);
        let gain = (1.0 - alpha_bar).sqrt() / (alpha_bar * self.var + 1.0 - alpha_bar);
        let shift = alpha_bar.sqrt() * self.mu;
        x_t.iter().map(|x| gain * (x - shift)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::PointCloud;
    use crate::diffusion::{forward_diffuse, make_schedule, reverse_denoise, SigmaRule};
    use crate::rng::RngHandle;

    #[test]
    fn unit_variance_centered_data_reduces_to_pure_scaling() {
        let schedule = make_schedule(200, 1e-4, 0.02, SigmaRule::Beta).unwrap();
        let denoiser = AnalyticGaussianDenoiser::new(Vec3::zeros(), 1.0, schedule.clone());
        let x = vec![Vec3::new(0.4, -1.1, 2.0)];
        for t in [1, 17, 200] {
            let predicted = denoiser.predict(&x, t);
            let expected = (1.0 - schedule.alpha_bar(t)).sqrt() * x[0];
            assert!((predicted[0] - expected).norm() < 1e-15, "t={t}");
        }
    }

    #[test]
    fn reverse_chain_moments_match_the_affine_gaussian_recursion() {
        // With the analytic predictor, every reverse update is an affine map
        // of x_t plus independent noise, so the output distribution follows
        // a scalar recursion over (mean, variance) per axis:
        //   slope_t     = (1 − w_t·g_t) / √α_t,  w_t = β_t/√(1−ᾱ_t),
        //   intercept_t = w_t·g_t·√ᾱ_t·μ / √α_t,
        //   mean_{t−1}  = slope_t·mean_t + intercept_t,
        //   var_{t−1}   = slope_t²·var_t + σ_t²  (σ dropped at t = 1),
        // where g_t is the predictor's gain. Starting from the exact
        // marginal at λ, the chain's endpoint must match the recursion.
        let schedule = make_schedule(200, 1e-4, 0.02, SigmaRule::Beta).unwrap();
        let mu = Vec3::new(0.3, -0.2, 0.7);
        let var = 0.25;
        let denoiser = AnalyticGaussianDenoiser::new(mu, var, schedule.clone());
        let lambda = 50;
        let alpha_bar = schedule.alpha_bar(lambda);
        let start_mean = alpha_bar.sqrt() * mu;
        let start_sd = (alpha_bar * var + 1.0 - alpha_bar).sqrt();

        let mut expected_mean = start_mean;
        let mut expected_var = start_sd * start_sd;
        for t in (1..=lambda).rev() {
            let bar = schedule.alpha_bar(t);
            let w = schedule.beta(t) / (1.0 - bar).sqrt();
            let g = (1.0 - bar).sqrt() / (bar * var + 1.0 - bar);
            let slope = (1.0 - w * g) / schedule.alpha(t).sqrt();
            let intercept = w * g * bar.sqrt() / schedule.alpha(t).sqrt() * mu;
            expected_mean = slope * expected_mean + intercept;
            expected_var *= slope * slope;
            if t > 1 {
                expected_var += schedule.sigma(t).powi(2);
            }
        }

        let mut rng = RngHandle::new(31);
        let trials = 10_000;
        let mut sums = Vec3::zeros();
        let mut sq_sums = Vec3::zeros();
        for _ in 0..trials {
            let x_t = start_mean
                + start_sd
                    * Vec3::new(rng.standard_normal(), rng.standard_normal(), rng.standard_normal());
            let cloud = PointCloud::new(vec![x_t]).unwrap();
            let out = reverse_denoise(&cloud, lambda, &denoiser, &schedule, &mut rng).unwrap();
            let p = out.points()[0];
            sums += p;
            sq_sums += p.component_mul(&p);
        }
        let n = trials as f64;
        for axis in 0..3 {
            let mean = sums[axis] / n;
            let var_hat = sq_sums[axis] / n - mean * mean;
            assert!(
                (mean - expected_mean[axis]).abs() < 4.0 * (expected_var / n).sqrt(),
                "axis {axis}: mean {mean:.5} expected {:.5}",
                expected_mean[axis]
            );
            assert!(
                (var_hat / expected_var - 1.0).abs() < 0.05,
                "axis {axis}: var {var_hat:.6} expected {expected_var:.6}"
            );
        }
    }

    #[test]
    fn full_chain_from_pure_noise_recovers_the_target_gaussian() {
        // Long schedule so ᾱ_T ≈ 0 and pure noise is the true endpoint
        // marginal; the chain should walk 2,000 independent points back to
        // N(μ, var·I) within Monte-Carlo tolerance.
        let schedule = make_schedule(1000, 1e-4, 0.02, SigmaRule::Beta).unwrap();
        let mu = Vec3::new(0.5, -0.3, 0.1);
        let var = 0.25;
        let denoiser = AnalyticGaussianDenoiser::new(mu, var, schedule.clone());
        let mut rng = RngHandle::new(47);
        let n = 2000;
        let noise: Vec<Vec3> = (0..n)
            .map(|_| Vec3::new(rng.standard_normal(), rng.standard_normal(), rng.standard_normal()))
            .collect();
        let cloud = PointCloud::new(noise).unwrap();
        let out = reverse_denoise(&cloud, 1000, &denoiser, &schedule, &mut rng).unwrap();
        let count = n as f64;
        let mean = out.points().iter().sum::<Vec3>() / count;
        for axis in 0..3 {
            let var_hat = out
                .points()
                .iter()
                .map(|p| (p[axis] - mean[axis]).powi(2))
                .sum::<f64>()
                / count;
            assert!(
                (mean[axis] - mu[axis]).abs() < 4.0 * (var / count).sqrt() + 0.01,
                "axis {axis}: mean {:.4} target {:.4}",
                mean[axis],
                mu[axis]
            );
            assert!(
                (var_hat / var - 1.0).abs() < 0.05,
                "axis {axis}: var {var_hat:.4} target {var:.4}"
            );
        }
    }

    #[test]
    fn forward_then_reverse_round_trip_stays_near_the_data_distribution() {
        // Diffuse genuine Gaussian data to a mid timestep and denoise back;
        // the recovered sample must match the data moments.
        let schedule = make_schedule(200, 1e-4, 0.02, SigmaRule::Beta).unwrap();
        let mu = Vec3::new(-0.2, 0.4, 0.0);
        let var = 0.09;
        let denoiser = AnalyticGaussianDenoiser::new(mu, var, schedule.clone());
        let mut rng = RngHandle::new(53);
        let n = 2000;
        let data: Vec<Vec3> = (0..n)
            .map(|_| {
                mu + var.sqrt()
                    * Vec3::new(rng.standard_normal(), rng.standard_normal(), rng.standard_normal())
            })
            .collect();
        let cloud = PointCloud::new(data).unwrap();
        let noisy = forward_diffuse(&cloud, 20, &schedule, &mut rng).unwrap();
        let out = reverse_denoise(&noisy, 20, &denoiser, &schedule, &mut rng).unwrap();
        let count = n as f64;
        let mean = out.points().iter().sum::<Vec3>() / count;
        for axis in 0..3 {
            let var_hat = out
                .points()
                .iter()
                .map(|p| (p[axis] - mean[axis]).powi(2))
                .sum::<f64>()
                / count;
            assert!((mean[axis] - mu[axis]).abs() < 0.03, "axis {axis}");
            assert!((var_hat / var - 1.0).abs() < 0.10, "axis {axis}: {var_hat:.4} vs {var}");
        }
    }
}
