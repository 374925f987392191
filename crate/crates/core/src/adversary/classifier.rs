//! Point-set victim classifier with hand-written gradients.
//!
//! Architecture: shared per-point encoder (3→H, ReLU), max-pool over
//! points, linear head (H→C). Pooling makes the logits exactly permutation
//! invariant, and the max-pool subgradient (winner takes all, ties to the
//! lowest index) gives closed-form gradients with respect to both parameters
//! and input coordinates — the property the gradient attacks rely on.
//! The encoder is piecewise linear, so the loss surface has no saturated
//! plateaus that would mask those gradients from an attacker.

use std::path::Path;

use rayon::prelude::*;

use crate::cloud::Vec3;
use crate::dataset::LabeledDataset;
use crate::denoiser::checkpoint::{
    read_magic_and_version, read_tensor, read_u32, write_magic_and_version, write_tensor,
    write_u32,
};
use crate::denoiser::nn::{clip_gradient, maxpool, relu_backward, relu_forward, Affine};
use crate::error::{Error, Result};
use crate::rng::RngHandle;

/// Magic bytes of classifier checkpoints.
pub const CLASSIFIER_MAGIC: &[u8; 4] = b"ACLS";

/// Classifier architecture sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassifierHyper {
    /// Per-point feature width.
    pub hidden: usize,
}

impl Default for ClassifierHyper {
    fn default() -> Self {
        ClassifierHyper { hidden: 32 }
    }
}

impl ClassifierHyper {
    fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::Config("classifier hidden width must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    encode: Affine,
    head: Affine,
    total: usize,
}

impl Layout {
    fn new(hyper: &ClassifierHyper, classes: usize) -> Layout {
        let h = hyper.hidden;
        let (encode, next) = Affine::at(0, 3, h);
        let (head, total) = Affine::at(next, h, classes);
        Layout { encode, head, total }
    }
}

struct ForwardTrace {
    acts: Vec<Vec<f64>>,
    global: Vec<f64>,
    winners: Vec<usize>,
    logits: Vec<f64>,
}

/// Max-pooled point-set classifier; see the module docs for the layout.
#[derive(Debug, Clone)]
pub struct ToyClassifier {
    hyper: ClassifierHyper,
    classes: usize,
    layout: Layout,
    params: Vec<f64>,
}

impl ToyClassifier {
    /// Fresh classifier with fan-in uniform initialization.
    pub fn new(hyper: ClassifierHyper, classes: usize, rng: &mut RngHandle) -> Result<Self> {
        hyper.validate()?;
        if classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {classes}")));
        }
        let layout = Layout::new(&hyper, classes);
        let mut params = vec![0.0; layout.total];
        layout.encode.init(&mut params, rng);
        layout.head.init(&mut params, rng);
        Ok(ToyClassifier { hyper, classes, layout, params })
    }

    /// Rebuilds a classifier around an existing flat parameter vector.
    pub fn from_parameters(
        hyper: ClassifierHyper,
        classes: usize,
        params: Vec<f64>,
    ) -> Result<Self> {
        hyper.validate()?;
        if classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {classes}")));
        }
        let layout = Layout::new(&hyper, classes);
        if params.len() != layout.total {
            return Err(Error::Contract(format!(
                "parameter vector has {} entries, layout needs {}",
                params.len(),
                layout.total
            )));
        }
        Ok(ToyClassifier { hyper, classes, layout, params })
    }

    pub fn hyper(&self) -> &ClassifierHyper {
        &self.hyper
    }

    /// Number of output classes.
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.layout.total
    }

    fn forward(&self, points: &[Vec3]) -> ForwardTrace {
        let h = self.hyper.hidden;
        let mut acts = Vec::with_capacity(points.len());
        for p in points {
            let mut a = vec![0.0; h];
            self.layout.encode.forward(&self.params, &[p.x, p.y, p.z], &mut a);
            relu_forward(&mut a);
            acts.push(a);
        }
        let (global, winners) = maxpool(&acts);
        let mut logits = vec![0.0; self.classes];
        self.layout.head.forward(&self.params, &global, &mut logits);
        ForwardTrace { acts, global, winners, logits }
    }

    /// Class scores for a cloud. Empty input is a contract violation.
    pub fn logits(&self, points: &[Vec3]) -> Vec<f64> {
        assert!(!points.is_empty(), "classifier needs at least one point");
        self.forward(points).logits
    }

    /// Most likely class; ties resolve to the lowest class index.
    pub fn predict_class(&self, points: &[Vec3]) -> usize {
        let logits = self.logits(points);
        let mut best = 0;
        for (c, &z) in logits.iter().enumerate() {
            if z > logits[best] {
                best = c;
            }
        }
        best
    }

    /// Backpropagates `grad_logits` through the pooled encoder, returning
    /// parameter gradients and per-point input gradients. Points that win no
    /// pooling slot have exactly zero input gradient.
    fn backward(&self, points: &[Vec3], trace: &ForwardTrace, grad_logits: &[f64]) -> (Vec<f64>, Vec<Vec3>) {
        let h = self.hyper.hidden;
        let mut grad_params = vec![0.0; self.layout.total];
        let mut grad_global = vec![0.0; h];
        self.layout.head.backward(
            &self.params,
            &trace.global,
            grad_logits,
            &mut grad_params,
            Some(&mut grad_global),
        );
        // Pooling routes each global slot's gradient to that slot's winner.
        let mut grad_acts: Vec<Vec<f64>> = vec![Vec::new(); points.len()];
        for (slot, &winner) in trace.winners.iter().enumerate() {
            if grad_acts[winner].is_empty() {
                grad_acts[winner] = vec![0.0; h];
            }
            grad_acts[winner][slot] += grad_global[slot];
        }
        let mut grad_points = vec![Vec3::zeros(); points.len()];
        for (i, mut g) in grad_acts.into_iter().enumerate() {
            if g.is_empty() {
                continue;
            }
            relu_backward(&trace.acts[i], &mut g);
            let p = &points[i];
            let mut gx = [0.0; 3];
            self.layout.encode.backward(
                &self.params,
                &[p.x, p.y, p.z],
                &g,
                &mut grad_params,
                Some(&mut gx),
            );
            grad_points[i] = Vec3::new(gx[0], gx[1], gx[2]);
        }
        (grad_params, grad_points)
    }

    /// Gradient of the scalar `Σ_c grad_logits[c]·z_c` with respect to every
    /// input coordinate — the hook the gradient attacks drive.
    pub fn input_gradient(&self, points: &[Vec3], grad_logits: &[f64]) -> Vec<Vec3> {
        assert_eq!(grad_logits.len(), self.classes, "one weight per class");
        let trace = self.forward(points);
        self.backward(points, &trace, grad_logits).1
    }

    /// Cross-entropy loss and its parameter gradient for one labeled cloud.
    pub fn loss_and_gradient(&self, points: &[Vec3], label: usize) -> (f64, Vec<f64>) {
        let trace = self.forward(points);
        let (loss, grad_logits) = cross_entropy(&trace.logits, label);
        let (grad_params, _) = self.backward(points, &trace, &grad_logits);
        (loss, grad_params)
    }

    /// Cross-entropy loss alone.
    pub fn loss(&self, points: &[Vec3], label: usize) -> f64 {
        cross_entropy(&self.logits(points), label).0
    }
}

/// Numerically stable cross-entropy: the loss and its logit gradient
/// (softmax minus one-hot).
pub(crate) fn cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    assert!(label < logits.len(), "label {label} out of range for {} classes", logits.len());
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|z| (z - max).exp()).sum();
    let loss = max + sum.ln() - logits[label];
    let mut grad: Vec<f64> = logits.iter().map(|z| (z - max).exp() / sum).collect();
    grad[label] -= 1.0;
    (loss, grad)
}

/// Classifier training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierTraining {
    pub epochs: usize,
    /// Clouds per SGD step.
    pub batch: usize,
    pub learning_rate: f64,
    pub hyper: ClassifierHyper,
}

impl Default for ClassifierTraining {
    fn default() -> Self {
        ClassifierTraining {
            epochs: 40,
            batch: 8,
            learning_rate: 0.05,
            hyper: ClassifierHyper::default(),
        }
    }
}

/// Per-epoch classifier training traces.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierLog {
    /// Mean cross-entropy per epoch.
    pub train_losses: Vec<f64>,
    /// Fraction of training clouds classified correctly, per epoch.
    pub train_accuracies: Vec<f64>,
}

/// Fraction of `dataset` clouds the model labels correctly.
pub fn accuracy(model: &ToyClassifier, dataset: &LabeledDataset) -> f64 {
    let correct: usize = dataset
        .clouds()
        .par_iter()
        .map(|cloud| {
            let label = cloud.label().expect("labeled dataset");
            usize::from(model.predict_class(cloud.points()) == label)
        })
        .sum();
    correct as f64 / dataset.len() as f64
}

/// Trains a fresh [`ToyClassifier`] on `dataset` with cross-entropy SGD.
///
/// Same determinism contract as the denoiser trainer: shuffled cloud order
/// per epoch, data-parallel per-cloud gradients reduced in fixed batch
/// order, gradient clipping, plain SGD. A non-finite loss aborts with a
/// training-failure error naming the epoch.
pub fn train_classifier(
    dataset: &LabeledDataset,
    training: &ClassifierTraining,
    rng: &mut RngHandle,
) -> Result<(ToyClassifier, ClassifierLog)> {
    if training.batch == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    if !(training.learning_rate.is_finite() && training.learning_rate > 0.0) {
        return Err(Error::Config(format!(
            "learning rate must be positive and finite, got {}",
            training.learning_rate
        )));
    }
    let classes = dataset.class_names().len();
    let mut model = ToyClassifier::new(training.hyper, classes, &mut rng.fork(0x1C15))?;
    let mut log = ClassifierLog { train_losses: Vec::new(), train_accuracies: Vec::new() };

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for epoch in 1..=training.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut epoch_correct = 0usize;
        for chunk in order.chunks(training.batch) {
            let results: Vec<(f64, Vec<f64>, bool)> = chunk
                .par_iter()
                .map(|&i| {
                    let cloud = &dataset.clouds()[i];
                    let label = cloud.label().expect("dataset labels are validated at construction");
                    let (loss, grad) = model.loss_and_gradient(cloud.points(), label);
                    let correct = model.predict_class(cloud.points()) == label;
                    (loss, grad, correct)
                })
                .collect();
            let weight = 1.0 / chunk.len() as f64;
            let mut grad = vec![0.0; model.parameter_count()];
            for (loss, g, correct) in &results {
                epoch_loss += loss;
                epoch_correct += usize::from(*correct);
                for (acc, v) in grad.iter_mut().zip(g) {
                    *acc += weight * v;
                }
            }
            clip_gradient(&mut grad, GRAD_CLIP_NORM);
            for (p, g) in model.parameters_mut().iter_mut().zip(&grad) {
                *p -= training.learning_rate * g;
            }
        }
        let mean_loss = epoch_loss / dataset.len() as f64;
        if !mean_loss.is_finite() {
            return Err(Error::TrainingFailure { epoch });
        }
        log.train_losses.push(mean_loss);
        log.train_accuracies.push(epoch_correct as f64 / dataset.len() as f64);
    }
    Ok((model, log))
}

/// Gradient-norm ceiling applied before every SGD step.
const GRAD_CLIP_NORM: f64 = 5.0;

/// Writes a classifier checkpoint (same binary grammar as the denoiser's,
/// magic "ACLS").
pub fn save_classifier(model: &ToyClassifier, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_magic_and_version(&mut w, CLASSIFIER_MAGIC, path)?;
    write_u32(&mut w, model.hyper.hidden as u32, path)?;
    write_u32(&mut w, model.classes as u32, path)?;
    let tensors = classifier_tensors(&model.hyper, model.classes);
    write_u32(&mut w, tensors.len() as u32, path)?;
    for (name, dims, offset, len) in tensors {
        write_tensor(&mut w, name, &dims, &model.params[offset..offset + len], path)?;
    }
    use std::io::Write;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a checkpoint written by [`save_classifier`].
pub fn load_classifier(path: &Path) -> Result<ToyClassifier> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = std::io::BufReader::new(file);
    read_magic_and_version(&mut r, CLASSIFIER_MAGIC, path)?;
    let hidden = read_u32(&mut r, path)? as usize;
    let classes = read_u32(&mut r, path)? as usize;
    let hyper = ClassifierHyper { hidden };
    let expected = classifier_tensors(&hyper, classes);
    let count = read_u32(&mut r, path)? as usize;
    if count != expected.len() {
        return Err(Error::format(
            path,
            format!("checkpoint has {count} tensors, expected {}", expected.len()),
        ));
    }
    let total: usize = expected.iter().map(|(_, _, _, len)| len).sum();
    let mut params = vec![0.0; total];
    for (name, dims, offset, len) in expected {
        let (found_name, found_dims, data) = read_tensor(&mut r, path)?;
        if found_name != name || found_dims != dims {
            return Err(Error::format(
                path,
                format!("tensor {found_name} {found_dims:?} where {name} {dims:?} expected"),
            ));
        }
        params[offset..offset + len].copy_from_slice(&data);
    }
    ToyClassifier::from_parameters(hyper, classes, params)
}

/// Expected tensor names, shapes, parameter offsets, and lengths, in file
/// order.
fn classifier_tensors(
    hyper: &ClassifierHyper,
    classes: usize,
) -> Vec<(&'static str, Vec<u32>, usize, usize)> {
    let h = hyper.hidden as u32;
    let c = classes as u32;
    let mut offset = 0usize;
    let mut out = Vec::new();
    for (name, dims) in [
        ("encode.weight", vec![h, 3]),
        ("encode.bias", vec![h]),
        ("head.weight", vec![c, h]),
        ("head.bias", vec![c]),
    ] {
        let len: usize = dims.iter().map(|&d| d as usize).product();
        out.push((name, dims, offset, len));
        offset += len;
    }
    out
}
