//! Experiment configuration: a TOML tree validated up front, with unknown
//! keys rejected so config drift surfaces as an error instead of a silently
//! ignored setting.

use std::path::{Path, PathBuf};

use ada3diff_core::adversary::{AttackConfig, AttackVariant, ClassifierTraining};
use ada3diff_core::dataset::DatasetSpec;
use ada3diff_core::denoiser::{DenoiserHyper, DenoiserTraining};
use ada3diff_core::diffusion::{make_schedule, NoiseSchedule, PurifierConfig, SigmaRule};
use ada3diff_core::distortion::{DistortionMode, DistortionParams, ThresholdRule};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Root seed; every stream below is a tagged fork of it.
    pub seed: u64,
    /// Output directory for artifacts and reports.
    pub out: PathBuf,
    pub dataset: DatasetSection,
    pub schedule: ScheduleSection,
    pub denoiser: DenoiserSection,
    pub classifier: ClassifierSection,
    pub distortion: DistortionSection,
    pub purifier: PurifierSection,
    pub attacks: Vec<AttackSection>,
    pub defenses: Vec<DefenseSection>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 42,
            out: PathBuf::from("runs/default"),
            dataset: DatasetSection::default(),
            schedule: ScheduleSection::default(),
            denoiser: DenoiserSection::default(),
            classifier: ClassifierSection::default(),
            distortion: DistortionSection::default(),
            purifier: PurifierSection::default(),
            attacks: default_attacks(),
            defenses: default_defenses(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let config: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.schedule.to_schedule()?;
        self.dataset.to_spec().validate_for_config()?;
        if self.purifier.rounds == 0 {
            return Err(CliError::config("purifier.rounds must be at least 1"));
        }
        if self.attacks.is_empty() {
            return Err(CliError::config("at least one attack must be configured"));
        }
        if self.defenses.is_empty() {
            return Err(CliError::config("at least one defense must be configured"));
        }
        let mut names: Vec<&str> = self.attacks.iter().map(|a| a.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.attacks.len() {
            return Err(CliError::config("attack names must be unique"));
        }
        let mut names: Vec<&str> = self.defenses.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.defenses.len() {
            return Err(CliError::config("defense names must be unique"));
        }
        for attack in &self.attacks {
            attack.validate()?;
        }
        for defense in &self.defenses {
            defense.validate(self.schedule.t_total)?;
        }
        Ok(())
    }
}

trait SpecValidate {
    fn validate_for_config(&self) -> Result<(), CliError>;
}

impl SpecValidate for DatasetSpec {
    fn validate_for_config(&self) -> Result<(), CliError> {
        // Surface invalid dataset parameters at config time rather than at
        // first generation; a one-cloud dry run exercises the full check.
        let mut probe = self.clone();
        probe.train_count = 1;
        probe.test_count = 1;
        ada3diff_core::dataset::generate_splits(&probe, &ada3diff_core::rng::RngHandle::new(0))
            .map(|_| ())
            .map_err(|e| CliError::config(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub points_per_cloud: usize,
    pub train_count: usize,
    pub test_count: usize,
    pub torus_minor_range: (f64, f64),
    pub size_range: (f64, f64),
    pub size_skew: f64,
    pub class_sizes: [f64; 3],
}

impl Default for DatasetSection {
    fn default() -> Self {
        let spec = DatasetSpec::default();
        DatasetSection {
            points_per_cloud: spec.points_per_cloud,
            train_count: spec.train_count,
            test_count: spec.test_count,
            torus_minor_range: spec.torus_minor_range,
            size_range: spec.size_range,
            size_skew: spec.size_skew,
            class_sizes: spec.class_sizes,
        }
    }
}

impl DatasetSection {
    pub fn to_spec(&self) -> DatasetSpec {
        DatasetSpec {
            points_per_cloud: self.points_per_cloud,
            train_count: self.train_count,
            test_count: self.test_count,
            torus_minor_range: self.torus_minor_range,
            size_range: self.size_range,
            size_skew: self.size_skew,
            class_sizes: self.class_sizes,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSection {
    pub t_total: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub sigma_rule: SigmaRule,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        ScheduleSection {
            t_total: 20,
            beta_start: 2e-5,
            beta_end: 2e-4,
            sigma_rule: SigmaRule::PosteriorBeta,
        }
    }
}

impl ScheduleSection {
    pub fn to_schedule(&self) -> Result<NoiseSchedule, CliError> {
        make_schedule(self.t_total, self.beta_start, self.beta_end, self.sigma_rule)
            .map_err(|e| CliError::config(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DenoiserSection {
    pub hidden: usize,
    pub embed: usize,
    pub decoder_layers: usize,
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
}

impl Default for DenoiserSection {
    fn default() -> Self {
        let training = DenoiserTraining::default();
        DenoiserSection {
            hidden: 128,
            embed: training.hyper.embed,
            decoder_layers: 2,
            epochs: 150,
            batch: training.batch,
            learning_rate: 0.1,
        }
    }
}

impl DenoiserSection {
    pub fn to_training(&self) -> DenoiserTraining {
        DenoiserTraining {
            epochs: self.epochs,
            batch: self.batch,
            learning_rate: self.learning_rate,
            hyper: DenoiserHyper {
                hidden: self.hidden,
                embed: self.embed,
                decoder_layers: self.decoder_layers,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierSection {
    pub hidden: usize,
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        let training = ClassifierTraining::default();
        ClassifierSection {
            hidden: training.hyper.hidden,
            epochs: training.epochs,
            batch: training.batch,
            learning_rate: training.learning_rate,
        }
    }
}

impl ClassifierSection {
    pub fn to_training(&self) -> ClassifierTraining {
        let mut training = ClassifierTraining {
            epochs: self.epochs,
            batch: self.batch,
            learning_rate: self.learning_rate,
            ..Default::default()
        };
        training.hyper.hidden = self.hidden;
        training
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistortionSection {
    pub k: usize,
    pub mode: DistortionMode,
    pub lambda_max: usize,
    pub threshold_rule: ThresholdRule,
}

impl Default for DistortionSection {
    fn default() -> Self {
        let params = DistortionParams::default();
        DistortionSection {
            k: params.k,
            mode: params.mode,
            lambda_max: 20,
            threshold_rule: ThresholdRule::EqualWidth,
        }
    }
}

impl DistortionSection {
    pub fn to_params(&self) -> DistortionParams {
        DistortionParams { k: self.k, mode: self.mode }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PurifierSection {
    pub rounds: usize,
    pub budget: f64,
    pub confidence: f64,
    pub reestimate_each_round: bool,
}

impl Default for PurifierSection {
    fn default() -> Self {
        let config = PurifierConfig::default();
        PurifierSection {
            rounds: config.rounds,
            budget: config.budget,
            confidence: config.confidence,
            reestimate_each_round: config.reestimate_each_round,
        }
    }
}

impl PurifierSection {
    pub fn to_config(&self, distortion: &DistortionSection) -> PurifierConfig {
        PurifierConfig {
            rounds: self.rounds,
            lambda_max: distortion.lambda_max,
            k: distortion.k,
            mode: distortion.mode,
            budget: self.budget,
            confidence: self.confidence,
            reestimate_each_round: self.reestimate_each_round,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    /// No perturbation; reports clean accuracy.
    None,
    Pgd,
    BpdaPgd,
    Jitter,
    Tangent,
    Drop,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSection {
    pub name: String,
    pub kind: AttackKind,
    /// L∞ budget per coordinate (gradient attacks).
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_step_size")]
    pub step_size: f64,
    /// Noise level (jitter and tangent attacks).
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Neighborhood size for tangent-plane estimation.
    #[serde(default = "default_tangent_k")]
    pub k: usize,
    /// Points removed (drop attack).
    #[serde(default = "default_drop_count")]
    pub drop_count: usize,
    /// Evaluate on a seeded subsample of this many test clouds.
    #[serde(default)]
    pub subset: Option<usize>,
}

fn default_epsilon() -> f64 {
    AttackConfig::default().epsilon
}
fn default_steps() -> usize {
    AttackConfig::default().steps
}
fn default_step_size() -> f64 {
    AttackConfig::default().step_size
}
fn default_sigma() -> f64 {
    0.05
}
fn default_tangent_k() -> usize {
    10
}
fn default_drop_count() -> usize {
    AttackConfig::default().drop_count
}

impl AttackSection {
    pub fn named(name: &str, kind: AttackKind) -> AttackSection {
        AttackSection {
            name: name.to_string(),
            kind,
            epsilon: default_epsilon(),
            steps: default_steps(),
            step_size: default_step_size(),
            sigma: default_sigma(),
            k: default_tangent_k(),
            drop_count: default_drop_count(),
            subset: None,
        }
    }

    pub fn to_attack_config(&self) -> AttackConfig {
        AttackConfig {
            epsilon: self.epsilon,
            steps: self.steps,
            step_size: self.step_size,
            variant: match self.kind {
                AttackKind::BpdaPgd => AttackVariant::BpdaPgd,
                _ => AttackVariant::Pgd,
            },
            drop_count: self.drop_count,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.name.is_empty() {
            return Err(CliError::config("attack name must be nonempty"));
        }
        match self.kind {
            AttackKind::Pgd | AttackKind::BpdaPgd => self
                .to_attack_config()
                .validate()
                .map_err(|e| CliError::config(format!("attack {:?}: {e}", self.name))),
            AttackKind::Jitter | AttackKind::Tangent => {
                if !(self.sigma.is_finite() && self.sigma >= 0.0) {
                    return Err(CliError::config(format!(
                        "attack {:?}: sigma must be finite and nonnegative",
                        self.name
                    )));
                }
                Ok(())
            }
            AttackKind::None | AttackKind::Drop => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DefenseKind {
    None,
    Srs,
    Sor,
    FixedDiffusion,
    Ada3diff,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefenseSection {
    pub name: String,
    pub kind: DefenseKind,
    /// Points kept by random subsampling.
    #[serde(default = "default_srs_keep")]
    pub keep: usize,
    /// Neighborhood size for statistical outlier removal.
    #[serde(default = "default_sor_k")]
    pub k: usize,
    /// Outlier threshold multiplier for statistical outlier removal.
    #[serde(default = "default_sor_alpha")]
    pub alpha: f64,
    /// Fixed diffusion depth; 0 is the identity defense.
    #[serde(default)]
    pub lambda: usize,
    /// Purification rounds (fixed diffusion and adaptive).
    #[serde(default = "default_defense_rounds")]
    pub rounds: usize,
}

fn default_srs_keep() -> usize {
    192
}
fn default_sor_k() -> usize {
    2
}
fn default_sor_alpha() -> f64 {
    1.1
}
fn default_defense_rounds() -> usize {
    PurifierConfig::default().rounds
}

impl DefenseSection {
    pub fn named(name: &str, kind: DefenseKind) -> DefenseSection {
        DefenseSection {
            name: name.to_string(),
            kind,
            keep: default_srs_keep(),
            k: default_sor_k(),
            alpha: default_sor_alpha(),
            lambda: 0,
            rounds: default_defense_rounds(),
        }
    }

    fn validate(&self, t_total: usize) -> Result<(), CliError> {
        if self.name.is_empty() {
            return Err(CliError::config("defense name must be nonempty"));
        }
        match self.kind {
            DefenseKind::Srs if self.keep == 0 => {
                Err(CliError::config(format!("defense {:?}: keep must be positive", self.name)))
            }
            DefenseKind::Sor if self.k == 0 => {
                Err(CliError::config(format!("defense {:?}: k must be positive", self.name)))
            }
            DefenseKind::FixedDiffusion if self.lambda > t_total => Err(CliError::config(format!(
                "defense {:?}: lambda {} exceeds schedule length {t_total}",
                self.name, self.lambda
            ))),
            DefenseKind::FixedDiffusion | DefenseKind::Ada3diff if self.rounds == 0 => {
                Err(CliError::config(format!("defense {:?}: rounds must be at least 1", self.name)))
            }
            _ => Ok(()),
        }
    }
}

pub fn default_attacks() -> Vec<AttackSection> {
    vec![
        AttackSection::named("none", AttackKind::None),
        AttackSection::named("pgd", AttackKind::Pgd),
        AttackSection { sigma: 0.05, ..AttackSection::named("jitter", AttackKind::Jitter) },
        AttackSection { sigma: 0.01, ..AttackSection::named("tangent", AttackKind::Tangent) },
        AttackSection::named("drop", AttackKind::Drop),
    ]
}

pub fn default_defenses() -> Vec<DefenseSection> {
    vec![
        DefenseSection::named("none", DefenseKind::None),
        DefenseSection::named("srs", DefenseKind::Srs),
        DefenseSection::named("sor", DefenseKind::Sor),
        DefenseSection::named("ada3diff", DefenseKind::Ada3diff),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_through_toml() {
        let config = ExperimentConfig::default();
        let text = toml::to_string_pretty(&config).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.seed, config.seed);
        assert_eq!(back.attacks.len(), config.attacks.len());
        assert_eq!(back.defenses.len(), config.defenses.len());
        back.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<ExperimentConfig>("typo_key = 1").unwrap_err();
        assert!(err.to_string().contains("typo_key"));

        let nested = "[dataset]\npoints_per_cloud = 64\nmystery = true";
        let err = toml::from_str::<ExperimentConfig>(nested).unwrap_err();
        assert!(err.to_string().contains("mystery"));
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let mut config = ExperimentConfig::default();
        config.attacks.push(AttackSection::named("pgd", AttackKind::Pgd));
        let err = config.validate().unwrap_err();
        assert!(err.to_string().contains("unique"));
    }

    #[test]
    fn invalid_schedule_is_a_config_error() {
        let mut config = ExperimentConfig::default();
        config.schedule.beta_end = 1.5;
        assert!(config.validate().is_err());
    }

    #[test]
    fn zero_rounds_rejected_everywhere() {
        let mut config = ExperimentConfig::default();
        config.purifier.rounds = 0;
        assert!(config.validate().is_err());

        let mut config = ExperimentConfig::default();
        config.defenses.push(DefenseSection {
            rounds: 0,
            ..DefenseSection::named("flat", DefenseKind::Ada3diff)
        });
        assert!(config.validate().is_err());
    }
}
