//! Artifact layout under the output directory, with actionable errors that
//! name the command that produces a missing file.

use std::path::{Path, PathBuf};

use ada3diff_core::adversary::{load_classifier, ToyClassifier};
use ada3diff_core::dataset::{load_split, LabeledDataset};
use ada3diff_core::denoiser::{load_denoiser, PointMlpDenoiser};

use crate::CliError;

pub struct Paths {
    out: PathBuf,
}

impl Paths {
    pub fn new(out: &Path) -> Paths {
        Paths { out: out.to_path_buf() }
    }

    pub fn out(&self) -> &Path {
        &self.out
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.out.join("dataset")
    }

    pub fn classifier(&self) -> PathBuf {
        self.out.join("classifier.bin")
    }

    pub fn denoiser(&self) -> PathBuf {
        self.out.join("denoiser.bin")
    }

    pub fn profile(&self) -> PathBuf {
        self.out.join("profile.json")
    }

    pub fn attack_dir(&self, attack: &str) -> PathBuf {
        self.out.join("attacked").join(attack)
    }

    pub fn purified_dir(&self, tag: &str) -> PathBuf {
        self.out.join("purified").join(tag)
    }

    pub fn report(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn ensure_out(&self) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.out)
            .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", self.out.display())))
    }

    pub fn load_train(&self) -> Result<LabeledDataset, CliError> {
        self.load_dataset("train")
    }

    pub fn load_test(&self) -> Result<LabeledDataset, CliError> {
        self.load_dataset("test")
    }

    fn load_dataset(&self, split: &str) -> Result<LabeledDataset, CliError> {
        let dir = self.dataset_dir();
        load_split(&dir, split).map_err(|e| {
            missing_artifact(&dir.join("manifest.toml"), "gen-data", &e.to_string())
        })
    }

    pub fn load_classifier(&self) -> Result<ToyClassifier, CliError> {
        let path = self.classifier();
        load_classifier(&path)
            .map_err(|e| missing_artifact(&path, "train-classifier", &e.to_string()))
    }

    pub fn load_denoiser(&self) -> Result<PointMlpDenoiser, CliError> {
        let path = self.denoiser();
        load_denoiser(&path).map_err(|e| missing_artifact(&path, "train-denoiser", &e.to_string()))
    }
}

fn missing_artifact(path: &Path, command: &str, detail: &str) -> CliError {
    CliError::runtime(format!(
        "cannot load {}: {detail}; generate it with `ada3diff {command}` using the same --out",
        path.display()
    ))
}

/// Writes `lines` to `path` atomically enough for test reruns: the content
/// is assembled in memory and written in one call.
pub fn write_text(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, content)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}
