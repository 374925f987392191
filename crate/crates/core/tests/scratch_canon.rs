use ada3diff_core::cloud::Vec3;
use ada3diff_core::dataset::LabeledDataset;
use ada3diff_core::denoiser::train::{train_denoiser, DenoiserTraining};
use ada3diff_core::denoiser::{Denoiser, DenoiserHyper};
use ada3diff_core::diffusion::{make_schedule, purify, PurifierConfig, SigmaRule};
use ada3diff_core::distortion::{profile_dataset, DistortionParams, ThresholdRule};
use ada3diff_core::geometry::chamfer_distance;
use ada3diff_core::rng::RngHandle;
use ada3diff_core::shapes::{sample_primitive, Shape};

fn canonical(count: usize, n: usize, seed: u64, shapes: &[Shape]) -> LabeledDataset {
    let mut rng = RngHandle::new(seed);
    let clouds = (0..count)
        .map(|i| {
            let shape = shapes[i % shapes.len()];
            sample_primitive(shape, n, &mut rng).unwrap()
        })
        .collect();
    LabeledDataset::new(vec!["sphere".into(), "cube".into(), "torus".into()], clouds).unwrap()
}

#[test]
#[ignore]
fn canonical_usefulness() {
    let shape_sets: [(&str, Vec<Shape>); 2] = [
        ("sphere-only", vec![Shape::Sphere]),
        ("three-shapes", vec![Shape::Sphere, Shape::Cube, Shape::torus_default()]),
    ];
    for (name, shapes) in shape_sets {
        let train = canonical(300, 256, 11, &shapes);
        let test = canonical(100, 256, 12, &shapes);
        let schedule = make_schedule(200, 1e-4, 0.02, SigmaRule::Beta).unwrap();
        let profile =
            profile_dataset(&train, &DistortionParams::default(), 20, ThresholdRule::EqualWidth)
                .unwrap();
        println!("[{name}] thresholds {:?}", profile.thresholds);
        let training = DenoiserTraining {
            epochs: 300,
            learning_rate: 0.1,
            hyper: DenoiserHyper { hidden: 64, ..Default::default() },
            ..Default::default()
        };
        let mut train_rng = RngHandle::new(7);
        let (net, log) = train_denoiser(&train, &schedule, &training, &mut train_rng).unwrap();
        println!(
            "[{name}] val {:.3} -> {:.3}",
            log.initial_validation_loss,
            log.validation_losses.last().unwrap()
        );

        // Per-timestep ε-residual fraction on held-out clouds.
        let mut meas_rng = RngHandle::new(991);
        for t in [5usize, 10, 15, 20, 50, 200] {
            let ab = schedule.alpha_bar(t);
            let mut num = 0.0;
            let mut den = 0.0;
            for clean in test.clouds().iter().take(8) {
                let (xt, eps): (Vec<Vec3>, Vec<Vec3>) = clean
                    .points()
                    .iter()
                    .map(|p| {
                        let e = Vec3::new(
                            meas_rng.standard_normal(),
                            meas_rng.standard_normal(),
                            meas_rng.standard_normal(),
                        );
                        (ab.sqrt() * p + (1.0 - ab).sqrt() * e, e)
                    })
                    .unzip();
                let pred = net.predict(&xt, t);
                for (phat, e) in pred.iter().zip(&eps) {
                    num += (phat - e).norm_squared();
                    den += e.norm_squared();
                }
            }
            println!("[{name}] t={t}: residual fraction {:.3}", num / den);
        }

        for rounds in [1usize, 4] {
            let config = PurifierConfig { rounds, ..Default::default() };
            let mut improved = 0;
            let mut sum_jit = 0.0;
            let mut sum_pur = 0.0;
            let mut lambda_hist = std::collections::BTreeMap::new();
            for (i, clean) in test.clouds().iter().enumerate() {
                let mut jrng = RngHandle::new(9000 + i as u64);
                let jittered = clean
                    .like(
                        clean
                            .points()
                            .iter()
                            .map(|p| {
                                p + 0.03
                                    * Vec3::new(
                                        jrng.standard_normal(),
                                        jrng.standard_normal(),
                                        jrng.standard_normal(),
                                    )
                            })
                            .collect(),
                    )
                    .unwrap();
                let mut prng = RngHandle::new(5000 + i as u64);
                let (purified, recs) =
                    purify(&jittered, &profile, &net, &schedule, &config, &mut prng).unwrap();
                *lambda_hist.entry(recs[0].lambda).or_insert(0usize) += 1;
                let cd_jit = chamfer_distance(&jittered, clean);
                let cd_pur = chamfer_distance(&purified, clean);
                sum_jit += cd_jit;
                sum_pur += cd_pur;
                if cd_pur < cd_jit {
                    improved += 1;
                }
            }
            println!(
                "[{name}] rounds={rounds}: improved={improved}/100 mean jit={:.5} pur={:.5} lambda1 hist={lambda_hist:?}",
                sum_jit / 100.0,
                sum_pur / 100.0
            );
        }
    }
}
