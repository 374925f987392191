//! Distortion estimator properties on whole clouds: exact zeros on planes,
//! isometry invariance, rank correlation with injected noise, and tangent
//! blindness, under a wall-clock bound.

use std::time::Instant;

use ada3diff_core::adversary::{jitter_attack, tangent_jitter};
use ada3diff_core::cloud::{PointCloud, Vec3};
use ada3diff_core::distortion::{estimate_distortion, DistortionParams};
use ada3diff_core::rng::RngHandle;
use ada3diff_core::shapes::{sample_primitive, Shape};
use nalgebra::{Rotation3, Vector3};

fn planar_grid(side: usize, spacing: f64, z: f64) -> PointCloud {
    let mut points = Vec::with_capacity(side * side);
    for i in 0..side {
        for j in 0..side {
            points.push(Vec3::new(i as f64 * spacing, j as f64 * spacing, z));
        }
    }
    PointCloud::new(points).unwrap()
}

#[test]
fn coplanar_cloud_has_exactly_zero_distortion() {
    let start = Instant::now();
    let cloud = planar_grid(16, 0.1, 0.3);
    let report = estimate_distortion(&cloud, &DistortionParams::default()).unwrap();
    assert!(
        report.cloud_estimate <= 1e-12,
        "planar E_x = {:.3e}",
        report.cloud_estimate
    );
    assert!(report.per_point.iter().all(|&d| d <= 1e-12));
    assert!(start.elapsed().as_secs() < 60);
}

#[test]
fn distortion_is_isometry_invariant() {
    let start = Instant::now();
    let params = DistortionParams::default();
    let mut rng = RngHandle::new(0xD1);
    for (case, shape) in [Shape::Sphere, Shape::Cube, Shape::torus_default()]
        .into_iter()
        .enumerate()
    {
        let cloud = sample_primitive(shape, 256, &mut rng).unwrap();
        let base = estimate_distortion(&cloud, &params).unwrap().cloud_estimate;

        let rotation = Rotation3::from_euler_angles(
            0.3 + case as f64,
            -0.8 + 0.5 * case as f64,
            1.7 - case as f64,
        );
        let shift = Vec3::new(5.0, -3.0, 2.5);
        let moved: Vec<Vec3> = cloud
            .points()
            .iter()
            .map(|p| {
                let r = rotation * Vector3::new(p.x, p.y, p.z);
                Vec3::new(r.x, r.y, r.z) + shift
            })
            .collect();
        let moved_cloud = PointCloud::new(moved).unwrap();
        let turned = estimate_distortion(&moved_cloud, &params).unwrap().cloud_estimate;
        assert!(
            (base - turned).abs() <= 1e-9,
            "shape {case}: E_x {base:.12e} vs isometry {turned:.12e}"
        );
    }
    assert!(start.elapsed().as_secs() < 60);
}

/// Spearman rank correlation; ties broken by position, which cannot occur
/// here because the inputs are strictly increasing noise levels.
fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let rank = |vals: &[f64]| -> Vec<f64> {
        let mut order: Vec<usize> = (0..vals.len()).collect();
        order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
        let mut ranks = vec![0.0; vals.len()];
        for (r, &i) in order.iter().enumerate() {
            ranks[i] = r as f64;
        }
        ranks
    };
    let rx = rank(xs);
    let ry = rank(ys);
    let n = xs.len() as f64;
    let mean = (n - 1.0) / 2.0;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for i in 0..xs.len() {
        cov += (rx[i] - mean) * (ry[i] - mean);
        var_x += (rx[i] - mean).powi(2);
        var_y += (ry[i] - mean).powi(2);
    }
    cov / (var_x.sqrt() * var_y.sqrt())
}

#[test]
fn mean_distortion_tracks_noise_level_in_rank_order() {
    let start = Instant::now();
    let params = DistortionParams::default();
    let sigmas = [0.0, 0.002, 0.005, 0.01, 0.02, 0.03, 0.05, 0.08];
    let mut rng = RngHandle::new(0xD2);
    let clouds: Vec<PointCloud> = (0..20)
        .map(|i| {
            let shape = [Shape::Sphere, Shape::Cube, Shape::torus_default()][i % 3];
            sample_primitive(shape, 256, &mut rng).unwrap()
        })
        .collect();

    let mut means = Vec::with_capacity(sigmas.len());
    for (si, &sigma) in sigmas.iter().enumerate() {
        let mut total = 0.0;
        for (ci, cloud) in clouds.iter().enumerate() {
            let mut jrng = RngHandle::new(7000 + (si * 100 + ci) as u64);
            let jittered = jitter_attack(cloud, sigma, &mut jrng).unwrap();
            total += estimate_distortion(&jittered, &params).unwrap().cloud_estimate;
        }
        means.push(total / clouds.len() as f64);
    }
    let rho = spearman(
        &sigmas.iter().copied().collect::<Vec<_>>(),
        &means,
    );
    assert!(rho > 0.99, "Spearman(sigma, mean E_x) = {rho:.4}, means {means:?}");
    assert!(start.elapsed().as_secs() < 60);
}

#[test]
fn tangent_jitter_on_a_plane_leaves_distortion_unchanged() {
    let start = Instant::now();
    let params = DistortionParams::default();
    let cloud = planar_grid(14, 0.1, -0.2);
    let before = estimate_distortion(&cloud, &params).unwrap().cloud_estimate;
    let mut rng = RngHandle::new(0xD3);
    let moved = tangent_jitter(&cloud, 0.02, 10, &mut rng).unwrap();
    let after = estimate_distortion(&moved, &params).unwrap().cloud_estimate;
    assert!(before <= 1e-12);
    assert!(
        (after - before).abs() <= 1e-9,
        "tangent jitter changed E_x: {before:.3e} -> {after:.3e}"
    );
    assert!(start.elapsed().as_secs() < 60);
}
