//! Trainable point-set noise predictor.
//!
//! A PointNet-style network: a shared per-point encoder lifts each
//! coordinate triple to a hidden vector (with a sinusoidal timestep
//! embedding added after the first projection), a max-pool over points
//! forms one global shape feature, and a shared decoder maps each point's
//! hidden vector concatenated with the global feature back to a 3-vector
//! noise prediction. Shared weights plus symmetric pooling make the network
//! exactly permutation-equivariant.

use serde::{Deserialize, Serialize};

use crate::cloud::Vec3;
use crate::denoiser::nn::{maxpool, sinusoidal_embedding, tanh_backward, tanh_forward, Affine};
use crate::denoiser::Denoiser;
use crate::error::{Error, Result};
use crate::rng::RngHandle;

/// Architecture sizes for [`PointMlpDenoiser`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenoiserHyper {
    /// Hidden width H of the per-point channels.
    pub hidden: usize,
    /// Sinusoidal timestep embedding dimension E (even).
    pub embed: usize,
    /// Hidden layers in the per-point decoder (≥ 1).
    pub decoder_layers: usize,
}

impl Default for DenoiserHyper {
    fn default() -> Self {
        DenoiserHyper { hidden: 64, embed: 32, decoder_layers: 1 }
    }
}

impl DenoiserHyper {
    fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::Config("hidden width must be positive".into()));
        }
        if self.embed == 0 || self.embed % 2 != 0 {
            return Err(Error::Config(format!(
                "embedding dimension must be positive and even, got {}",
                self.embed
            )));
        }
        if self.decoder_layers == 0 {
            return Err(Error::Config("decoder needs at least one hidden layer".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Layout {
    encode1: Affine,
    time_proj: Affine,
    encode2: Affine,
    /// First maps the 2H concatenation to H; the rest are H→H.
    decode_hidden: Vec<Affine>,
    decode_out: Affine,
    total: usize,
}

impl Layout {
    fn new(hyper: &DenoiserHyper) -> Layout {
        let h = hyper.hidden;
        let (encode1, end) = Affine::at(0, 3, h);
        let (time_proj, end) = Affine::at(end, hyper.embed, h);
        let (encode2, mut end) = Affine::at(end, h, h);
        let mut decode_hidden = Vec::with_capacity(hyper.decoder_layers);
        let mut width = 2 * h;
        for _ in 0..hyper.decoder_layers {
            let (layer, next) = Affine::at(end, width, h);
            decode_hidden.push(layer);
            end = next;
            width = h;
        }
        let (decode_out, total) = Affine::at(end, h, 3);
        Layout { encode1, time_proj, encode2, decode_hidden, decode_out, total }
    }
}

/// Intermediate activations of one forward pass, kept for backprop.
struct ForwardTrace {
    embedding: Vec<f64>,
    act1: Vec<Vec<f64>>,
    act2: Vec<Vec<f64>>,
    global: Vec<f64>,
    winners: Vec<usize>,
    /// Decoder activations, indexed `[layer][point]`.
    decode_acts: Vec<Vec<Vec<f64>>>,
    output: Vec<Vec3>,
}

/// Trainable ε-predictor with hand-written gradients.
#[derive(Debug, Clone)]
pub struct PointMlpDenoiser {
    hyper: DenoiserHyper,
    /// Timestep count of the schedule this model was built for.
    t_total: usize,
    layout: Layout,
    params: Vec<f64>,
}

impl PointMlpDenoiser {
    /// Fresh network with symmetric uniform fan-in initialization.
    pub fn new(hyper: DenoiserHyper, t_total: usize, rng: &mut RngHandle) -> Result<Self> {
        hyper.validate()?;
        if t_total == 0 {
            return Err(Error::Config("t_total must be positive".into()));
        }
        let layout = Layout::new(&hyper);
        let mut params = vec![0.0; layout.total];
        for layer in [layout.encode1, layout.time_proj, layout.encode2]
            .into_iter()
            .chain(layout.decode_hidden.iter().copied())
            .chain([layout.decode_out])
        {
            layer.init(&mut params, rng);
        }
        Ok(PointMlpDenoiser { hyper, t_total, layout, params })
    }

    /// Rebuilds a network from checkpointed parameters.
    pub fn from_parameters(
        hyper: DenoiserHyper,
        t_total: usize,
        params: Vec<f64>,
    ) -> Result<Self> {
        hyper.validate()?;
        let layout = Layout::new(&hyper);
        if params.len() != layout.total {
            return Err(Error::Contract(format!(
                "parameter vector has {} entries, architecture needs {}",
                params.len(),
                layout.total
            )));
        }
        Ok(PointMlpDenoiser { hyper, t_total, layout, params })
    }

    pub fn hyper(&self) -> &DenoiserHyper {
        &self.hyper
    }

    pub fn t_total(&self) -> usize {
        self.t_total
    }

    pub fn parameter_count(&self) -> usize {
        self.layout.total
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn forward(&self, x_t: &[Vec3], t: usize) -> ForwardTrace {
        let h = self.hyper.hidden;
        let embedding = sinusoidal_embedding(t, self.hyper.embed);
        let mut time_shift = vec![0.0; h];
        self.layout.time_proj.forward(&self.params, &embedding, &mut time_shift);

        let mut act1 = Vec::with_capacity(x_t.len());
        let mut act2 = Vec::with_capacity(x_t.len());
        for p in x_t {
            let mut a1 = vec![0.0; h];
            self.layout.encode1.forward(&self.params, &[p.x, p.y, p.z], &mut a1);
            for (a, shift) in a1.iter_mut().zip(&time_shift) {
                *a += shift;
            }
            tanh_forward(&mut a1);
            let mut a2 = vec![0.0; h];
            self.layout.encode2.forward(&self.params, &a1, &mut a2);
            tanh_forward(&mut a2);
            act1.push(a1);
            act2.push(a2);
        }
        let (global, winners) = maxpool(&act2);

        let mut decode_acts: Vec<Vec<Vec<f64>>> =
            (0..self.layout.decode_hidden.len()).map(|_| Vec::with_capacity(x_t.len())).collect();
        let mut output = Vec::with_capacity(x_t.len());
        let mut joined = vec![0.0; 2 * h];
        for a2 in &act2 {
            joined[..h].copy_from_slice(a2);
            joined[h..].copy_from_slice(&global);
            let mut carry = joined.clone();
            for (layer, acts) in self.layout.decode_hidden.iter().zip(&mut decode_acts) {
                let mut a = vec![0.0; h];
                layer.forward(&self.params, &carry, &mut a);
                tanh_forward(&mut a);
                carry = a.clone();
                acts.push(a);
            }
            let mut out = vec![0.0; 3];
            self.layout.decode_out.forward(&self.params, &carry, &mut out);
            output.push(Vec3::new(out[0], out[1], out[2]));
        }
        ForwardTrace { embedding, act1, act2, global, winners, decode_acts, output }
    }

    /// Mean-squared ε-matching loss and its parameter gradient for one
    /// noised cloud. The gradient is accumulated into `grad` (same length as
    /// the parameter vector).
    pub fn loss_and_gradient(
        &self,
        x_t: &[Vec3],
        t: usize,
        target_eps: &[Vec3],
        grad: &mut [f64],
    ) -> f64 {
        debug_assert_eq!(x_t.len(), target_eps.len());
        debug_assert_eq!(grad.len(), self.layout.total);
        let h = self.hyper.hidden;
        let n = x_t.len();
        let trace = self.forward(x_t, t);

        let scale = 1.0 / (3 * n) as f64;
        let loss: f64 = trace
            .output
            .iter()
            .zip(target_eps)
            .map(|(o, e)| (o - e).norm_squared())
            .sum::<f64>()
            * scale;

        // Decoder backward, collecting per-point gradients on act2 plus the
        // pooled global feature's gradient.
        let depth = self.layout.decode_hidden.len();
        let mut grad_act2: Vec<Vec<f64>> = vec![vec![0.0; h]; n];
        let mut grad_global = vec![0.0; h];
        let mut joined = vec![0.0; 2 * h];
        for i in 0..n {
            let grad_out: Vec<f64> = (0..3)
                .map(|axis| 2.0 * scale * (trace.output[i][axis] - target_eps[i][axis]))
                .collect();
            let mut grad_a = vec![0.0; h];
            self.layout.decode_out.backward(
                &self.params,
                &trace.decode_acts[depth - 1][i],
                &grad_out,
                grad,
                Some(&mut grad_a),
            );
            for layer in (1..depth).rev() {
                tanh_backward(&trace.decode_acts[layer][i], &mut grad_a);
                let mut grad_prev = vec![0.0; h];
                self.layout.decode_hidden[layer].backward(
                    &self.params,
                    &trace.decode_acts[layer - 1][i],
                    &grad_a,
                    grad,
                    Some(&mut grad_prev),
                );
                grad_a = grad_prev;
            }
            tanh_backward(&trace.decode_acts[0][i], &mut grad_a);
            joined[..h].copy_from_slice(&trace.act2[i]);
            joined[h..].copy_from_slice(&trace.global);
            let mut grad_joined = vec![0.0; 2 * h];
            self.layout.decode_hidden[0].backward(
                &self.params,
                &joined,
                &grad_a,
                grad,
                Some(&mut grad_joined),
            );
            for d in 0..h {
                grad_act2[i][d] += grad_joined[d];
                grad_global[d] += grad_joined[h + d];
            }
        }
        // Max-pool routes the global gradient to each dimension's winner.
        for (d, &winner) in trace.winners.iter().enumerate() {
            grad_act2[winner][d] += grad_global[d];
        }

        // Encoder backward; the timestep projection receives the summed
        // gradient over points since the shift is shared.
        let mut grad_time_shift = vec![0.0; h];
        for i in 0..n {
            let mut grad_a2 = std::mem::take(&mut grad_act2[i]);
            tanh_backward(&trace.act2[i], &mut grad_a2);
            let mut grad_a1 = vec![0.0; h];
            self.layout.encode2.backward(
                &self.params,
                &trace.act1[i],
                &grad_a2,
                grad,
                Some(&mut grad_a1),
            );
            tanh_backward(&trace.act1[i], &mut grad_a1);
            let p = x_t[i];
            self.layout.encode1.backward(&self.params, &[p.x, p.y, p.z], &grad_a1, grad, None);
            for (acc, g) in grad_time_shift.iter_mut().zip(&grad_a1) {
                *acc += g;
            }
        }
        self.layout.time_proj.backward(
            &self.params,
            &trace.embedding,
            &grad_time_shift,
            grad,
            None,
        );
        loss
    }

    /// Loss only, for validation batches.
    pub fn loss(&self, x_t: &[Vec3], t: usize, target_eps: &[Vec3]) -> f64 {
        let trace = self.forward(x_t, t);
        let scale = 1.0 / (3 * x_t.len()) as f64;
        trace
            .output
            .iter()
            .zip(target_eps)
            .map(|(o, e)| (o - e).norm_squared())
            .sum::<f64>()
            * scale
    }
}

impl Denoiser for PointMlpDenoiser {
    fn predict(&self, x_t: &[Vec3], t: usize) -> Vec<Vec3> {
        self.forward(x_t, t).output
    }
}
