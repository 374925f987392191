//! The adversarial side of the benchmark: a differentiable point-set
//! victim classifier, gradient attacks (plain and purifier-aware),
//! geometric perturbations, and the classical preprocessing defenses the
//! purifier is compared against.

pub mod attacks;
pub mod classifier;
pub mod defense;

pub use attacks::{
    bpda_pgd_attack, drop_attack, jitter_attack, pgd_attack, tangent_jitter, AttackConfig,
    AttackLoss, AttackVariant,
};
pub use classifier::{
    accuracy, load_classifier, save_classifier, train_classifier, ClassifierHyper, ClassifierLog,
    ClassifierTraining, ToyClassifier,
};
pub use defense::{sor_defense, srs_defense};
