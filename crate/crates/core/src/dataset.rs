//! Labeled datasets, their on-disk manifest, and synthetic generation.
//!
//! A dataset directory holds one `manifest.toml` plus one cloud file per
//! entry. The manifest is the only place labels and split membership live:
//!
//! ```toml
//! class_names = ["sphere", "cube", "torus"]
//!
//! [[clouds]]
//! path = "train/c0000.pcb"
//! label = 0
//! split = "train"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::io;
use crate::rng::RngHandle;
use crate::shapes::{sample_primitive, Shape};

/// A collection of equally sized, labeled point clouds.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    class_names: Vec<String>,
    clouds: Vec<PointCloud>,
}

impl LabeledDataset {
    /// Validates and assembles a dataset.
    ///
    /// Every cloud must carry a label below the class count, and all clouds
    /// must share the same point count.
    pub fn new(class_names: Vec<String>, clouds: Vec<PointCloud>) -> Result<Self> {
        if class_names.is_empty() {
            return Err(Error::InvalidInput("dataset needs at least one class".into()));
        }
        if clouds.is_empty() {
            return Err(Error::InvalidInput("dataset needs at least one cloud".into()));
        }
        let n = clouds[0].len();
        for (i, cloud) in clouds.iter().enumerate() {
            match cloud.label() {
                None => return Err(Error::InvalidInput(format!("cloud {i} has no label"))),
                Some(label) if label >= class_names.len() => {
                    return Err(Error::InvalidInput(format!(
                        "cloud {i} label {label} out of range for {} classes",
                        class_names.len()
                    )))
                }
                Some(_) => {}
            }
            if cloud.len() != n {
                return Err(Error::InvalidInput(format!(
                    "cloud {i} has {} points, expected {n} (all clouds must match)",
                    cloud.len()
                )));
            }
        }
        Ok(LabeledDataset { class_names, clouds })
    }

    /// Class names, indexed by label.
    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// The clouds, in manifest order.
    pub fn clouds(&self) -> &[PointCloud] {
        &self.clouds
    }

    /// Number of clouds.
    pub fn len(&self) -> usize {
        self.clouds.len()
    }

    /// True when the dataset holds no clouds (unreachable after `new`).
    pub fn is_empty(&self) -> bool {
        self.clouds.is_empty()
    }

    /// Points per cloud (uniform across the dataset).
    pub fn points_per_cloud(&self) -> usize {
        self.clouds[0].len()
    }

    /// A new dataset containing the clouds at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<LabeledDataset> {
        let clouds = indices
            .iter()
            .map(|&i| {
                self.clouds.get(i).cloned().ok_or_else(|| {
                    Error::InvalidArgument(format!("subset index {i} out of range ({} clouds)", self.len()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        LabeledDataset::new(self.class_names.clone(), clouds)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    class_names: Vec<String>,
    clouds: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    path: String,
    label: usize,
    split: String,
}

/// Writes `train` and `test` under `dir` (creating `dir/train`, `dir/test`)
/// in the binary format, plus `dir/manifest.toml` describing both splits.
pub fn save_splits(train: &LabeledDataset, test: &LabeledDataset, dir: &Path) -> Result<()> {
    if train.class_names() != test.class_names() {
        return Err(Error::InvalidInput("train/test class name lists differ".into()));
    }
    let mut entries = Vec::with_capacity(train.len() + test.len());
    for (split, dataset) in [("train", train), ("test", test)] {
        let split_dir = dir.join(split);
        std::fs::create_dir_all(&split_dir).map_err(|e| Error::io(&split_dir, e))?;
        for (i, cloud) in dataset.clouds().iter().enumerate() {
            let rel = format!("{split}/c{i:04}.pcb");
            io::write_pcb(cloud, &dir.join(&rel))?;
            entries.push(ManifestEntry {
                path: rel,
                label: cloud.label().expect("validated on construction"),
                split: split.to_string(),
            });
        }
    }
    let manifest = ManifestFile { class_names: train.class_names().to_vec(), clouds: entries };
    let text = toml::to_string_pretty(&manifest)
        .map_err(|e| Error::Contract(format!("manifest serialization failed: {e}")))?;
    let path = dir.join("manifest.toml");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Loads one split (`"train"` or `"test"`) from a dataset directory.
pub fn load_split(dir: &Path, split: &str) -> Result<LabeledDataset> {
    let manifest_path = dir.join("manifest.toml");
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: ManifestFile =
        toml::from_str(&text).map_err(|e| Error::format(&manifest_path, e.to_string()))?;
    let mut clouds = Vec::new();
    for entry in manifest.clouds.iter().filter(|e| e.split == split) {
        let rel = PathBuf::from(&entry.path);
        if rel.is_absolute() || rel.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
            return Err(Error::format(
                &manifest_path,
                format!("cloud path {:?} must be relative and stay inside the dataset dir", entry.path),
            ));
        }
        let cloud = io::read_cloud(&dir.join(rel))?;
        clouds.push(cloud.relabeled(Some(entry.label)));
    }
    if clouds.is_empty() {
        return Err(Error::format(&manifest_path, format!("no clouds in split {split:?}")));
    }
    LabeledDataset::new(manifest.class_names, clouds)
}

/// Parameters for synthetic dataset generation.
#[derive(Debug, Clone)]
pub struct DatasetSpec {
    /// Points per cloud.
    pub points_per_cloud: usize,
    /// Clouds in the training split.
    pub train_count: usize,
    /// Clouds in the test split.
    pub test_count: usize,
    /// Per-cloud torus tube radius is drawn uniformly from this range; the
    /// ring radius is `0.5 - minor`, keeping the torus inscribed in the unit
    /// cube. Varying tube curvature spreads the clean distortion distribution
    /// the way object variety does in scanned benchmarks.
    pub torus_minor_range: (f64, f64),
    /// Per-cloud size factor support `(lo, hi)`. Scanned object collections
    /// are dominated by small items with a thinner tail of large ones, and
    /// mean distortion grows linearly with object size at a fixed point
    /// count, so this size spread is what gives the clean distortion
    /// distribution its natural right skew.
    pub size_range: (f64, f64),
    /// Skew exponent for the size draw: the factor is
    /// `lo + (hi - lo) * u^size_skew` with `u` uniform on `[0, 1]`. Higher
    /// values concentrate mass near `lo`; 1 is uniform.
    pub size_skew: f64,
    /// Relative base size per class (sphere, cube, torus). Defaults put the
    /// three primitives' clean distortion on a common scale, so profile
    /// thresholds track surface complexity rather than class identity.
    pub class_sizes: [f64; 3],
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            points_per_cloud: 256,
            train_count: 300,
            test_count: 150,
            torus_minor_range: (0.08, 0.20),
            size_range: (0.95, 1.55),
            size_skew: 3.0,
            class_sizes: [1.1, 0.8, 1.0],
        }
    }
}

impl DatasetSpec {
    /// The fixed class list: sphere, cube, torus.
    pub fn class_names() -> Vec<String> {
        vec!["sphere".into(), "cube".into(), "torus".into()]
    }

    fn validate(&self) -> Result<()> {
        if self.points_per_cloud < 16 {
            return Err(Error::Config("points_per_cloud must be at least 16".into()));
        }
        if self.train_count == 0 || self.test_count == 0 {
            return Err(Error::Config("train_count and test_count must be positive".into()));
        }
        let (lo, hi) = self.torus_minor_range;
        if !(0.0 < lo && lo <= hi && hi < 0.25) {
            return Err(Error::Config(format!(
                "torus_minor_range must satisfy 0 < lo <= hi < 0.25, got ({lo}, {hi})"
            )));
        }
        let (slo, shi) = self.size_range;
        if !(0.0 < slo && slo <= shi) {
            return Err(Error::Config(format!(
                "size_range must satisfy 0 < lo <= hi, got ({slo}, {shi})"
            )));
        }
        if !(self.size_skew >= 1.0) {
            return Err(Error::Config(format!(
                "size_skew must be at least 1, got {}",
                self.size_skew
            )));
        }
        if self.class_sizes.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Config("class_sizes must all be positive".into()));
        }
        Ok(())
    }

    fn shape_for(&self, global_index: usize, rng: &mut RngHandle) -> Shape {
        match global_index % 3 {
            0 => Shape::Sphere,
            1 => Shape::Cube,
            _ => {
                let (lo, hi) = self.torus_minor_range;
                let minor = if lo == hi { lo } else { rng.uniform(lo, hi) };
                Shape::Torus { major: 0.5 - minor, minor }
            }
        }
    }

    fn size_for(&self, class: usize, rng: &mut RngHandle) -> f64 {
        let (lo, hi) = self.size_range;
        let u = rng.uniform(0.0, 1.0);
        self.class_sizes[class] * (lo + (hi - lo) * u.powf(self.size_skew))
    }
}

/// Generates the train and test splits.
///
/// Classes cycle sphere → cube → torus; each cloud draws from its own RNG
/// stream forked by global cloud index, so any cloud is reproducible in
/// isolation and the split contents do not depend on generation order.
pub fn generate_splits(spec: &DatasetSpec, rng: &RngHandle) -> Result<(LabeledDataset, LabeledDataset)> {
    spec.validate()?;
    let make = |start: usize, count: usize| -> Result<Vec<PointCloud>> {
        (0..count)
            .map(|i| {
                let mut cloud_rng = rng.fork((start + i) as u64);
                let shape = spec.shape_for(start + i, &mut cloud_rng);
                let cloud = sample_primitive(shape, spec.points_per_cloud, &mut cloud_rng)?;
                let size = spec.size_for(shape.class_index(), &mut cloud_rng);
                cloud.like(cloud.points().iter().map(|p| p * size).collect())
            })
            .collect()
    };
    let train = LabeledDataset::new(DatasetSpec::class_names(), make(0, spec.train_count)?)?;
    let test =
        LabeledDataset::new(DatasetSpec::class_names(), make(spec.train_count, spec.test_count)?)?;
    Ok((train, test))
}
