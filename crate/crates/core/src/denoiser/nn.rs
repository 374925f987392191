//! Flat-parameter neural-net plumbing: affine layers, tanh, max-pooling
//! with recorded winners, sinusoidal timestep embeddings, gradient clipping,
//! and a finite-difference probe.
//!
//! All models in this crate keep their parameters in one `Vec<f64>` and
//! describe layers as offsets into it, so checkpointing, SGD, and gradient
//! checks operate on plain slices. Backward functions accumulate into their
//! gradient outputs (callers zero them once per example).

use crate::rng::RngHandle;

/// An affine layer `y = W·x + b` stored row-major inside a flat parameter
/// vector: `W[out][in]` at `w_off`, then `b[out]` at `b_off`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Affine {
    pub w_off: usize,
    pub b_off: usize,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Affine {
    /// Lays the layer out at `offset`, returning the first offset after it.
    pub fn at(offset: usize, in_dim: usize, out_dim: usize) -> (Affine, usize) {
        let layer = Affine { w_off: offset, b_off: offset + in_dim * out_dim, in_dim, out_dim };
        (layer, layer.b_off + out_dim)
    }

    #[cfg(test)]
    pub fn parameter_count(&self) -> usize {
        self.in_dim * self.out_dim + self.out_dim
    }

    /// `y = W·x + b`.
    pub fn forward(&self, params: &[f64], x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.in_dim);
        debug_assert_eq!(y.len(), self.out_dim);
        for (o, out) in y.iter_mut().enumerate() {
            let row = &params[self.w_off + o * self.in_dim..self.w_off + (o + 1) * self.in_dim];
            let mut acc = params[self.b_off + o];
            for (w, v) in row.iter().zip(x) {
                acc += w * v;
            }
            *out = acc;
        }
    }

    /// Accumulates parameter gradients and, when `grad_x` is given, the
    /// input gradient, from `grad_y = ∂L/∂y`.
    pub fn backward(
        &self,
        params: &[f64],
        x: &[f64],
        grad_y: &[f64],
        grad_params: &mut [f64],
        grad_x: Option<&mut [f64]>,
    ) {
        debug_assert_eq!(x.len(), self.in_dim);
        debug_assert_eq!(grad_y.len(), self.out_dim);
        for (o, gy) in grad_y.iter().enumerate() {
            let w_row = self.w_off + o * self.in_dim;
            for (i, v) in x.iter().enumerate() {
                grad_params[w_row + i] += gy * v;
            }
            grad_params[self.b_off + o] += gy;
        }
        if let Some(gx) = grad_x {
            debug_assert_eq!(gx.len(), self.in_dim);
            for (o, gy) in grad_y.iter().enumerate() {
                let row =
                    &params[self.w_off + o * self.in_dim..self.w_off + (o + 1) * self.in_dim];
                for (g, w) in gx.iter_mut().zip(row) {
                    *g += gy * w;
                }
            }
        }
    }

    /// Fills the layer with symmetric uniform fan-in initialization
    /// (`U(−1/√in, 1/√in)` weights, zero biases).
    pub fn init(&self, params: &mut [f64], rng: &mut RngHandle) {
        let bound = 1.0 / (self.in_dim as f64).sqrt();
        for w in &mut params[self.w_off..self.w_off + self.in_dim * self.out_dim] {
            *w = rng.uniform(-bound, bound);
        }
        for b in &mut params[self.b_off..self.b_off + self.out_dim] {
            *b = 0.0;
        }
    }
}

/// In-place tanh.
pub fn tanh_forward(values: &mut [f64]) {
    for v in values {
        *v = v.tanh();
    }
}

/// Given activations `a = tanh(z)` and `∂L/∂a`, writes `∂L/∂z = g·(1−a²)`
/// into `grad` in place.
pub fn tanh_backward(activations: &[f64], grad: &mut [f64]) {
    for (g, a) in grad.iter_mut().zip(activations) {
        *g *= 1.0 - a * a;
    }
}

/// Rectifies in place: `a = max(z, 0)`.
pub fn relu_forward(values: &mut [f64]) {
    for v in values.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Given activations `a = max(z, 0)` and `∂L/∂a`, writes `∂L/∂z` into `grad`
/// in place, using subgradient 0 at the kink.
pub fn relu_backward(activations: &[f64], grad: &mut [f64]) {
    for (g, a) in grad.iter_mut().zip(activations) {
        if *a <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Per-dimension max over rows, recording the winning row per dimension.
/// Ties go to the lowest row index.
pub fn maxpool(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<usize>) {
    let dim = rows[0].len();
    let mut best = rows[0].clone();
    let mut winners = vec![0usize; dim];
    for (r, row) in rows.iter().enumerate().skip(1) {
        for d in 0..dim {
            if row[d] > best[d] {
                best[d] = row[d];
                winners[d] = r;
            }
        }
    }
    (best, winners)
}

/// Sinusoidal position embedding of a timestep: pairs
/// `(sin(t·ω_i), cos(t·ω_i))` with `ω_i = 10000^(−2i/dim)`. `dim` must be
/// even.
pub fn sinusoidal_embedding(t: usize, dim: usize) -> Vec<f64> {
    debug_assert!(dim % 2 == 0, "embedding dimension must be even");
    let mut emb = vec![0.0; dim];
    for i in 0..dim / 2 {
        let freq = 10000f64.powf(-2.0 * i as f64 / dim as f64);
        let angle = t as f64 * freq;
        emb[2 * i] = angle.sin();
        emb[2 * i + 1] = angle.cos();
    }
    emb
}

/// Scales the gradient down to `max_norm` when its L2 norm exceeds it.
/// Returns the pre-clip norm.
pub fn clip_gradient(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grad.iter_mut() {
            *g *= scale;
        }
    }
    norm
}

/// Central finite difference of `f` along the given parameter indices.
#[cfg(test)]
pub fn numeric_gradient<F: FnMut(&[f64]) -> f64>(
    params: &mut [f64],
    indices: &[usize],
    step: f64,
    mut f: F,
) -> Vec<f64> {
    indices
        .iter()
        .map(|&i| {
            let original = params[i];
            params[i] = original + step;
            let plus = f(params);
            params[i] = original - step;
            let minus = f(params);
            params[i] = original;
            (plus - minus) / (2.0 * step)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_layout_is_contiguous() {
        let (a, end_a) = Affine::at(0, 3, 4);
        let (b, end_b) = Affine::at(end_a, 4, 2);
        assert_eq!(a.parameter_count(), 16);
        assert_eq!(end_a, 16);
        assert_eq!(b.w_off, 16);
        assert_eq!(end_b, 16 + 10);
    }

    #[test]
    fn affine_forward_hand_example() {
        let (layer, len) = Affine::at(0, 2, 2);
        let mut params = vec![0.0; len];
        params[..4].copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        params[4..].copy_from_slice(&[0.5, -0.5]);
        let mut y = [0.0; 2];
        layer.forward(&params, &[1.0, 1.0], &mut y);
        assert_eq!(y, [3.5, 6.5]);
    }

    #[test]
    fn affine_gradients_match_finite_differences() {
        let (layer, len) = Affine::at(0, 3, 2);
        let mut rng = RngHandle::new(5);
        let mut params = vec![0.0; len];
        layer.init(&mut params, &mut rng);
        for b in &mut params[layer.b_off..layer.b_off + 2] {
            *b = rng.uniform(-0.5, 0.5);
        }
        let x = [0.3, -0.7, 0.2];
        // Loss: sum of squared outputs.
        let loss = |p: &[f64]| {
            let mut y = [0.0; 2];
            layer.forward(p, &x, &mut y);
            y.iter().map(|v| v * v).sum::<f64>()
        };
        let mut y = [0.0; 2];
        layer.forward(&params, &x, &mut y);
        let grad_y: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
        let mut grad_params = vec![0.0; len];
        let mut grad_x = vec![0.0; 3];
        layer.backward(&params, &x, &grad_y, &mut grad_params, Some(&mut grad_x));
        let indices: Vec<usize> = (0..len).collect();
        let numeric = numeric_gradient(&mut params, &indices, 1e-6, loss);
        for (i, (a, n)) in grad_params.iter().zip(&numeric).enumerate() {
            assert!((a - n).abs() < 1e-7, "param {i}: analytic {a} numeric {n}");
        }
        // Input gradient via the same finite-difference trick.
        for axis in 0..3 {
            let mut x_var = x;
            let h = 1e-6;
            x_var[axis] = x[axis] + h;
            let mut y_p = [0.0; 2];
            layer.forward(&params, &x_var, &mut y_p);
            x_var[axis] = x[axis] - h;
            let mut y_m = [0.0; 2];
            layer.forward(&params, &x_var, &mut y_m);
            let numeric = (y_p.iter().map(|v| v * v).sum::<f64>()
                - y_m.iter().map(|v| v * v).sum::<f64>())
                / (2.0 * h);
            assert!((grad_x[axis] - numeric).abs() < 1e-7);
        }
    }

    #[test]
    fn tanh_backward_matches_derivative() {
        let mut values = vec![0.5, -1.2, 0.0];
        tanh_forward(&mut values);
        let mut grad = vec![1.0, 1.0, 1.0];
        tanh_backward(&values, &mut grad);
        for (g, z) in grad.iter().zip([0.5f64, -1.2, 0.0]) {
            let expected = 1.0 - z.tanh().powi(2);
            assert!((g - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn maxpool_breaks_ties_toward_lowest_index() {
        let rows = vec![vec![1.0, 5.0], vec![1.0, 7.0], vec![1.0, 7.0]];
        let (best, winners) = maxpool(&rows);
        assert_eq!(best, vec![1.0, 7.0]);
        assert_eq!(winners, vec![0, 1]);
    }

    #[test]
    fn embedding_is_unit_scaled_and_time_sensitive() {
        let a = sinusoidal_embedding(3, 8);
        let b = sinusoidal_embedding(4, 8);
        assert_eq!(a.len(), 8);
        assert!(a.iter().all(|v| v.abs() <= 1.0));
        assert_ne!(a, b);
        // Paired sin/cos of one frequency have unit norm.
        for i in 0..4 {
            assert!((a[2 * i].powi(2) + a[2 * i + 1].powi(2) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn clip_rescales_only_above_threshold() {
        let mut grad = vec![3.0, 4.0];
        let norm = clip_gradient(&mut grad, 10.0);
        assert_eq!(norm, 5.0);
        assert_eq!(grad, vec![3.0, 4.0]);
        let norm = clip_gradient(&mut grad, 1.0);
        assert_eq!(norm, 5.0);
        let clipped: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        assert!((clipped - 1.0).abs() < 1e-12);
    }
}
