//! Fixed-timestep and round-count sweeps: per-attack accuracy for each
//! parameter value alongside the adaptive row, plus the adaptive selection
//! histogram.

use ada3diff_core::rng::RngHandle;

use crate::artifacts::{write_text, Paths};
use crate::config::{DefenseKind, DefenseSection, ExperimentConfig};
use crate::pipeline::{build_attack_set, evaluate_cell, AttackSet, Pipeline};
use crate::CliError;

fn named_pivot(first_column: &str, attacks: &[String], rows: &[(String, Vec<f64>)]) -> String {
    let mut out = String::from(first_column);
    for attack in attacks {
        out.push(',');
        out.push_str(attack);
    }
    out.push('\n');
    for (name, values) in rows {
        out.push_str(name);
        for value in values {
            out.push_str(&format!(",{value:.6}"));
        }
        out.push('\n');
    }
    out
}

fn sweep_rows(
    pipeline: &Pipeline,
    attack_sets: &[AttackSet],
    variants: &[DefenseSection],
    root: &RngHandle,
) -> Result<(Vec<(String, Vec<f64>)>, Vec<(String, usize, usize)>), CliError> {
    let mut rows = Vec::new();
    let mut histogram = Vec::new();
    for defense in variants {
        let mut accuracies = Vec::with_capacity(attack_sets.len());
        for set in attack_sets {
            let outcome = evaluate_cell(pipeline, defense, set, root)?;
            accuracies.push(outcome.accuracy);
            if defense.kind == DefenseKind::Ada3diff {
                for (lambda, count) in outcome.lambda_histogram {
                    histogram.push((set.name.clone(), lambda, count));
                }
            }
        }
        rows.push((defense.name.clone(), accuracies));
    }
    Ok((rows, histogram))
}

/// Robust accuracy per attack for each fixed diffusion depth in `lambdas`
/// plus the adaptive purifier, with the adaptive round-1 selection counts.
pub fn timestep_sweep(
    config: &ExperimentConfig,
    paths: &Paths,
    lambdas: &[usize],
) -> Result<(), CliError> {
    for &lambda in lambdas {
        if lambda > config.schedule.t_total {
            return Err(CliError::config(format!(
                "sweep lambda {lambda} exceeds schedule length {}",
                config.schedule.t_total
            )));
        }
    }
    let pipeline = Pipeline::load(config, paths)?;
    let root = RngHandle::new(config.seed);
    let attack_sets: Result<Vec<_>, CliError> =
        config.attacks.iter().map(|a| build_attack_set(&pipeline, a, &root)).collect();
    let attack_sets = attack_sets?;

    let mut variants: Vec<DefenseSection> = lambdas
        .iter()
        .map(|&lambda| DefenseSection {
            lambda,
            rounds: config.purifier.rounds,
            ..DefenseSection::named(&format!("fixed-{lambda}"), DefenseKind::FixedDiffusion)
        })
        .collect();
    variants.push(DefenseSection {
        rounds: config.purifier.rounds,
        ..DefenseSection::named("adaptive", DefenseKind::Ada3diff)
    });

    let (rows, histogram) = sweep_rows(&pipeline, &attack_sets, &variants, &root)?;
    let attack_names: Vec<String> = config.attacks.iter().map(|a| a.name.clone()).collect();
    write_text(
        &paths.report("sweep_timesteps.csv"),
        &named_pivot("defense", &attack_names, &rows),
    )?;

    let mut hist = String::from("attack,lambda,count\n");
    for (attack, lambda, count) in histogram {
        hist.push_str(&format!("{attack},{lambda},{count}\n"));
    }
    write_text(&paths.report("timestep_histogram.csv"), &hist)
}

/// Robust accuracy per attack for the adaptive purifier at each round count.
pub fn rounds_sweep(
    config: &ExperimentConfig,
    paths: &Paths,
    rounds_list: &[usize],
) -> Result<(), CliError> {
    if rounds_list.iter().any(|&r| r == 0) {
        return Err(CliError::config("rounds sweep values must be at least 1"));
    }
    let pipeline = Pipeline::load(config, paths)?;
    let root = RngHandle::new(config.seed);
    let attack_sets: Result<Vec<_>, CliError> =
        config.attacks.iter().map(|a| build_attack_set(&pipeline, a, &root)).collect();
    let attack_sets = attack_sets?;

    let variants: Vec<DefenseSection> = rounds_list
        .iter()
        .map(|&rounds| DefenseSection {
            rounds,
            ..DefenseSection::named(&format!("rounds-{rounds}"), DefenseKind::Ada3diff)
        })
        .collect();

    let (rows, _) = sweep_rows(&pipeline, &attack_sets, &variants, &root)?;
    let attack_names: Vec<String> = config.attacks.iter().map(|a| a.name.clone()).collect();
    write_text(&paths.report("sweep_rounds.csv"), &named_pivot("rounds", &attack_names, &rows))
}
