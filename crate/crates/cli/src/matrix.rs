//! The attack×defense evaluation matrix: every pair becomes exactly one
//! result record, written as JSON lines plus a CSV pivot (rows = defenses,
//! columns = attacks). Wall times are nondeterministic measurements, so they
//! go to a separate timings file and never into the deterministic outputs.

use std::collections::BTreeSet;
use std::path::Path;
use std::time::Instant;

use ada3diff_core::distortion::save_profile;
use ada3diff_core::rng::RngHandle;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::{write_text, Paths};
use crate::config::ExperimentConfig;
use crate::pipeline::{build_attack_set, evaluate_cell, Pipeline};
use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRecord {
    pub attack: String,
    pub defense: String,
    pub robust_accuracy: f64,
    pub mean_chamfer_to_clean: f64,
    pub mean_distortion_pre: f64,
    pub mean_distortion_post: f64,
    /// Measured per cell; reported in timings.csv only, so the deterministic
    /// outputs stay byte-stable across reruns.
    #[serde(skip_serializing, default)]
    pub wall_time_seconds: f64,
    pub seed: u64,
}

impl ResultRecord {
    fn validate(&self) -> Result<(), CliError> {
        let finite = self.robust_accuracy.is_finite()
            && self.mean_chamfer_to_clean.is_finite()
            && self.mean_distortion_pre.is_finite()
            && self.mean_distortion_post.is_finite();
        if !finite || !(0.0..=1.0).contains(&self.robust_accuracy) {
            return Err(CliError::runtime(format!(
                "result for ({}, {}) has out-of-range metrics: {self:?}",
                self.attack, self.defense
            )));
        }
        Ok(())
    }
}

pub fn run_matrix(config: &ExperimentConfig, paths: &Paths) -> Result<Vec<ResultRecord>, CliError> {
    let pipeline = Pipeline::load(config, paths)?;
    let root = RngHandle::new(config.seed);

    let attack_sets: Result<Vec<_>, CliError> =
        config.attacks.iter().map(|a| build_attack_set(&pipeline, a, &root)).collect();
    let attack_sets = attack_sets?;

    let cells: Vec<(usize, usize)> = (0..config.defenses.len())
        .flat_map(|d| (0..config.attacks.len()).map(move |a| (d, a)))
        .collect();

    let mut records: Vec<((usize, usize), ResultRecord)> = cells
        .par_iter()
        .map(|&(d, a)| {
            let started = Instant::now();
            let outcome =
                evaluate_cell(&pipeline, &config.defenses[d], &attack_sets[a], &root)?;
            let record = ResultRecord {
                attack: config.attacks[a].name.clone(),
                defense: config.defenses[d].name.clone(),
                robust_accuracy: outcome.accuracy,
                mean_chamfer_to_clean: outcome.mean_chamfer_to_clean,
                mean_distortion_pre: outcome.mean_distortion_pre,
                mean_distortion_post: outcome.mean_distortion_post,
                wall_time_seconds: started.elapsed().as_secs_f64(),
                seed: config.seed,
            };
            record.validate()?;
            Ok(((d, a), record))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    records.sort_by_key(|(key, _)| *key);

    let seen: BTreeSet<(usize, usize)> = records.iter().map(|(key, _)| *key).collect();
    if seen.len() != config.defenses.len() * config.attacks.len() {
        return Err(CliError::runtime(format!(
            "matrix accounting violated: {} records for {} cells",
            seen.len(),
            config.defenses.len() * config.attacks.len()
        )));
    }

    let records: Vec<ResultRecord> = records.into_iter().map(|(_, r)| r).collect();
    write_outputs(config, paths, &records)?;
    save_profile(&pipeline.profile, &paths.profile())?;
    Ok(records)
}

fn write_outputs(
    config: &ExperimentConfig,
    paths: &Paths,
    records: &[ResultRecord],
) -> Result<(), CliError> {
    let mut jsonl = String::new();
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| CliError::runtime(format!("record serialization failed: {e}")))?;
        jsonl.push_str(&line);
        jsonl.push('\n');
    }
    write_text(&paths.report("results.jsonl"), &jsonl)?;

    let attack_names: Vec<&str> = config.attacks.iter().map(|a| a.name.as_str()).collect();
    let mut pivot = String::from("defense");
    for name in &attack_names {
        pivot.push(',');
        pivot.push_str(name);
    }
    pivot.push('\n');
    for (d, defense) in config.defenses.iter().enumerate() {
        pivot.push_str(&defense.name);
        for a in 0..attack_names.len() {
            let record = &records[d * attack_names.len() + a];
            debug_assert_eq!(record.defense, defense.name);
            pivot.push_str(&format!(",{:.6}", record.robust_accuracy));
        }
        pivot.push('\n');
    }
    write_text(&paths.report("results.csv"), &pivot)?;

    let mut timings = String::from("defense,attack,wall_time_seconds\n");
    for record in records {
        timings.push_str(&format!(
            "{},{},{:.3}\n",
            record.defense, record.attack, record.wall_time_seconds
        ));
    }
    write_text(&paths.report("timings.csv"), &timings)
}

/// A parsed accuracy pivot: attack column names plus one row per defense.
#[derive(Debug, Clone, PartialEq)]
pub struct PivotTable {
    pub attacks: Vec<String>,
    pub rows: Vec<(String, Vec<f64>)>,
}

impl PivotTable {
    pub fn accuracy(&self, defense: &str, attack: &str) -> Option<f64> {
        let column = self.attacks.iter().position(|a| a == attack)?;
        let row = self.rows.iter().find(|(name, _)| name == defense)?;
        row.1.get(column).copied()
    }
}

/// Reads back a pivot CSV produced by this module (or the sweep modules,
/// which share the layout: one name column followed by float columns).
pub fn read_pivot(path: &Path) -> Result<PivotTable, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::runtime(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?
        .clone();
    let attacks: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
        let name = record
            .get(0)
            .ok_or_else(|| CliError::runtime(format!("{}: empty row", path.display())))?
            .to_string();
        let values: Result<Vec<f64>, CliError> = record
            .iter()
            .skip(1)
            .map(|field| {
                field.parse::<f64>().map_err(|_| {
                    CliError::runtime(format!(
                        "{}: unparseable value {field:?} in row {name:?}",
                        path.display()
                    ))
                })
            })
            .collect();
        let values = values?;
        if values.len() != attacks.len() {
            return Err(CliError::runtime(format!(
                "{}: row {name:?} has {} values for {} columns",
                path.display(),
                values.len(),
                attacks.len()
            )));
        }
        rows.push((name, values));
    }
    Ok(PivotTable { attacks, rows })
}

/// Reads back results.jsonl.
pub fn read_records(path: &Path) -> Result<Vec<ResultRecord>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::runtime(format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .map(|line| {
            serde_json::from_str(line)
                .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
        })
        .collect()
}
