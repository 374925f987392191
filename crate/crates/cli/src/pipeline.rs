//! Shared assembly for the evaluation commands: loading trained artifacts,
//! building attacked cloud sets, and applying defenses, all on tagged RNG
//! streams so results depend only on config and seed, never on thread
//! interleaving.

use ada3diff_core::adversary::{
    bpda_pgd_attack, drop_attack, jitter_attack, pgd_attack, sor_defense, srs_defense,
    tangent_jitter, ToyClassifier,
};
use ada3diff_core::cloud::PointCloud;
use ada3diff_core::dataset::LabeledDataset;
use ada3diff_core::denoiser::PointMlpDenoiser;
use ada3diff_core::diffusion::{purify, purify_fixed, NoiseSchedule, PurifierConfig, RoundRecord};
use ada3diff_core::distortion::{
    estimate_distortion, profile_dataset, DistortionParams, DistortionProfile,
};
use ada3diff_core::geometry::chamfer_distance;
use ada3diff_core::rng::RngHandle;
use rayon::prelude::*;

use crate::config::{AttackKind, AttackSection, DefenseKind, DefenseSection, ExperimentConfig};
use crate::artifacts::Paths;
use crate::CliError;

/// Top-level stream tags forked off the root seed.
pub const STREAM_DATA: u64 = 1;
pub const STREAM_CLASSIFIER: u64 = 2;
pub const STREAM_DENOISER: u64 = 3;
pub const STREAM_ATTACK: u64 = 4;
pub const STREAM_DEFENSE: u64 = 5;
pub const STREAM_STABILITY: u64 = 6;

/// Name-keyed stream tag, stable under list reordering.
pub fn stream_tag(name: &str) -> u64 {
    let mut tag: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in name.bytes() {
        tag ^= u64::from(byte);
        tag = tag.wrapping_mul(0x0000_0100_0000_01b3);
    }
    tag
}

/// Everything the evaluation commands share, loaded once.
pub struct Pipeline {
    pub schedule: NoiseSchedule,
    pub params: DistortionParams,
    pub profile: DistortionProfile,
    pub purifier: PurifierConfig,
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub classifier: ToyClassifier,
    pub denoiser: PointMlpDenoiser,
}

impl Pipeline {
    pub fn load(config: &ExperimentConfig, paths: &Paths) -> Result<Pipeline, CliError> {
        let train = paths.load_train()?;
        let test = paths.load_test()?;
        let classifier = paths.load_classifier()?;
        let denoiser = paths.load_denoiser()?;
        let schedule = config.schedule.to_schedule()?;
        let params = config.distortion.to_params();
        let profile = profile_dataset(
            &train,
            &params,
            config.distortion.lambda_max,
            config.distortion.threshold_rule,
        )?;
        let purifier = config.purifier.to_config(&config.distortion);
        Ok(Pipeline { schedule, params, profile, purifier, train, test, classifier, denoiser })
    }
}

/// An attacked view of the test set: `indices[i]` is the test-set position
/// `clouds[i]` was derived from.
pub struct AttackSet {
    pub name: String,
    pub indices: Vec<usize>,
    pub clouds: Vec<PointCloud>,
}

pub fn build_attack_set(
    pipeline: &Pipeline,
    section: &AttackSection,
    root: &RngHandle,
) -> Result<AttackSet, CliError> {
    let stream = root.fork(STREAM_ATTACK).fork(stream_tag(&section.name));
    let test = &pipeline.test;
    let indices: Vec<usize> = match section.subset {
        Some(k) => {
            if k == 0 || k > test.len() {
                return Err(CliError::config(format!(
                    "attack {:?}: subset {k} outside 1..={}",
                    section.name,
                    test.len()
                )));
            }
            let mut pick_rng = stream.fork(u64::MAX);
            let mut picks = pick_rng.sample_indices(test.len(), k);
            picks.sort_unstable();
            picks
        }
        None => (0..test.len()).collect(),
    };

    let attack_config = section.to_attack_config();
    let clouds: Result<Vec<PointCloud>, CliError> = indices
        .par_iter()
        .map(|&idx| {
            let cloud = &test.clouds()[idx];
            let mut rng = stream.fork(idx as u64);
            let attacked = match section.kind {
                AttackKind::None => Ok(cloud.clone()),
                AttackKind::Pgd => {
                    pgd_attack(&pipeline.classifier, cloud, &attack_config, &mut rng)
                }
                AttackKind::BpdaPgd => {
                    let mut purify_rng = stream.fork(idx as u64 ^ 0x5eed_0000_0000_0001);
                    let profile = &pipeline.profile;
                    let denoiser = &pipeline.denoiser;
                    let schedule = &pipeline.schedule;
                    let config = &pipeline.purifier;
                    bpda_pgd_attack(
                        &pipeline.classifier,
                        |points| {
                            let as_cloud = PointCloud::new(points.to_vec())?;
                            let (purified, _) = purify(
                                &as_cloud,
                                profile,
                                denoiser,
                                schedule,
                                config,
                                &mut purify_rng,
                            )?;
                            Ok(purified.points().to_vec())
                        },
                        cloud,
                        &attack_config,
                        &mut rng,
                    )
                }
                AttackKind::Jitter => jitter_attack(cloud, section.sigma, &mut rng),
                AttackKind::Tangent => tangent_jitter(cloud, section.sigma, section.k, &mut rng),
                AttackKind::Drop => drop_attack(&pipeline.classifier, cloud, section.drop_count),
            };
            attacked.map_err(CliError::from)
        })
        .collect();

    Ok(AttackSet { name: section.name.clone(), indices, clouds: clouds? })
}

/// Applies one defense to one cloud. Adaptive purification also returns its
/// per-round records for timestep histograms.
pub fn apply_defense(
    pipeline: &Pipeline,
    section: &DefenseSection,
    profile: &DistortionProfile,
    input: &PointCloud,
    rng: &mut RngHandle,
) -> Result<(PointCloud, Option<Vec<RoundRecord>>), CliError> {
    match section.kind {
        DefenseKind::None => Ok((input.clone(), None)),
        DefenseKind::Srs => Ok((srs_defense(input, section.keep, rng)?, None)),
        DefenseKind::Sor => Ok((sor_defense(input, section.k, section.alpha)?, None)),
        DefenseKind::FixedDiffusion => Ok((
            purify_fixed(
                input,
                section.lambda,
                section.rounds,
                &pipeline.denoiser,
                &pipeline.schedule,
                rng,
            )?,
            None,
        )),
        DefenseKind::Ada3diff => {
            let config = PurifierConfig { rounds: section.rounds, ..pipeline.purifier };
            let (purified, rounds) =
                purify(input, profile, &pipeline.denoiser, &pipeline.schedule, &config, rng)?;
            Ok((purified, Some(rounds)))
        }
    }
}

/// One evaluated (defense, attack) cell.
pub struct CellOutcome {
    pub accuracy: f64,
    pub mean_chamfer_to_clean: f64,
    pub mean_distortion_pre: f64,
    pub mean_distortion_post: f64,
    /// Round-1 adaptive selections, as (lambda, count), ascending; empty for
    /// non-adaptive defenses.
    pub lambda_histogram: Vec<(usize, usize)>,
}

pub fn evaluate_cell(
    pipeline: &Pipeline,
    defense: &DefenseSection,
    attack: &AttackSet,
    root: &RngHandle,
) -> Result<CellOutcome, CliError> {
    let stream =
        root.fork(STREAM_DEFENSE).fork(stream_tag(&defense.name)).fork(stream_tag(&attack.name));
    let per_cloud: Result<Vec<(bool, f64, f64, f64, Option<usize>)>, CliError> = attack
        .clouds
        .par_iter()
        .zip(&attack.indices)
        .map(|(attacked, &idx)| {
            let clean = &pipeline.test.clouds()[idx];
            let mut rng = stream.fork(idx as u64);
            let (defended, rounds) =
                apply_defense(pipeline, defense, &pipeline.profile, attacked, &mut rng)?;
            let correct = pipeline.classifier.predict_class(defended.points())
                == clean.label().expect("labeled test cloud");
            let cd = chamfer_distance(&defended, clean);
            let pre = estimate_distortion(attacked, &pipeline.params)?.cloud_estimate;
            let post = estimate_distortion(&defended, &pipeline.params)?.cloud_estimate;
            let first_lambda = rounds.as_ref().map(|r| r[0].lambda);
            Ok((correct, cd, pre, post, first_lambda))
        })
        .collect();
    let per_cloud = per_cloud?;

    let n = per_cloud.len() as f64;
    let mut histogram = std::collections::BTreeMap::new();
    for (_, _, _, _, lambda) in &per_cloud {
        if let Some(l) = lambda {
            *histogram.entry(*l).or_insert(0usize) += 1;
        }
    }
    Ok(CellOutcome {
        accuracy: per_cloud.iter().filter(|c| c.0).count() as f64 / n,
        mean_chamfer_to_clean: per_cloud.iter().map(|c| c.1).sum::<f64>() / n,
        mean_distortion_pre: per_cloud.iter().map(|c| c.2).sum::<f64>() / n,
        mean_distortion_post: per_cloud.iter().map(|c| c.3).sum::<f64>() / n,
        lambda_histogram: histogram.into_iter().collect(),
    })
}
