//! Fully connected tanh networks over a flat parameter slice.
//!
//! Layer `l` maps `sizes[l]` inputs to `sizes[l + 1]` outputs and is stored as
//! a row-major weight matrix followed by its bias. Hidden layers use tanh; the
//! output layer is linear.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpShape {
    pub sizes: Vec<usize>,
}

/// Activations saved by the forward pass for backprop.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// `layers[l]` is the input to layer `l`; the last entry is the output.
    pub layers: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.layers.last().unwrap()
    }
}

impl MlpShape {
    pub fn new(input: usize, hidden: &[usize], output: usize) -> Self {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        Self { sizes }
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }

    /// `(weight offset, bias offset)` of layer `l`.
    pub fn offsets(&self, l: usize) -> (usize, usize) {
        let start: usize = self.sizes.windows(2).take(l).map(|w| w[1] * w[0] + w[1]).sum();
        (start, start + self.sizes[l + 1] * self.sizes[l])
    }

    pub fn forward(&self, params: &[f64], x: &[f64]) -> MlpCache {
        debug_assert_eq!(params.len(), self.n_params());
        debug_assert_eq!(x.len(), self.input_dim());
        let mut layers = Vec::with_capacity(self.sizes.len());
        layers.push(x.to_vec());
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (w, b) = self.offsets(l);
            let input = &layers[l];
            let last = l + 1 == self.n_layers();
            let out: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &params[w + o * n_in..w + (o + 1) * n_in];
                    let z = params[b + o] + row.iter().zip(input).map(|(p, v)| p * v).sum::<f64>();
                    if last { z } else { z.tanh() }
                })
                .collect();
            layers.push(out);
        }
        MlpCache { layers }
    }

    /// Accumulates `d(loss)/d(params)` into `grad` given `d(loss)/d(output)`.
    pub fn backward(&self, params: &[f64], cache: &MlpCache, d_out: &[f64], grad: &mut [f64]) {
        let mut delta = d_out.to_vec();
        for l in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (w, b) = self.offsets(l);
            if l + 1 != self.n_layers() {
                // through tanh: 1 - y^2
                for (d, y) in delta.iter_mut().zip(&cache.layers[l + 1]) {
                    *d *= 1.0 - y * y;
                }
            }
            let input = &cache.layers[l];
            for o in 0..n_out {
                grad[b + o] += delta[o];
                let g = &mut grad[w + o * n_in..w + (o + 1) * n_in];
                for (gi, xi) in g.iter_mut().zip(input) {
                    *gi += delta[o] * xi;
                }
            }
            if l > 0 {
                let mut prev = vec![0.0; n_in];
                for o in 0..n_out {
                    let row = &params[w + o * n_in..w + (o + 1) * n_in];
                    for (p, wi) in prev.iter_mut().zip(row) {
                        *p += delta[o] * wi;
                    }
                }
                delta = prev;
            }
        }
    }

    /// Orthogonal weights scaled by `hidden_gain` (last layer `output_gain`),
    /// zero biases.
    pub fn init_orthogonal<R: Rng + ?Sized>(&self, rng: &mut R, hidden_gain: f64, output_gain: f64) -> Vec<f64> {
        let mut params = vec![0.0; self.n_params()];
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let gain = if l + 1 == self.n_layers() { output_gain } else { hidden_gain };
            let q = orthogonal(rng, n_out, n_in);
            let (w, _) = self.offsets(l);
            for o in 0..n_out {
                for i in 0..n_in {
                    params[w + o * n_in + i] = gain * q[(o, i)];
                }
            }
        }
        params
    }
}

/// A `rows x cols` matrix with orthonormal rows or columns, whichever is fewer.
pub fn orthogonal<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    let (tall, short) = (rows.max(cols), rows.min(cols));
    let a = DMatrix::from_fn(tall, short, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..short {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if rows < cols { q.transpose() } else { q }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn counts_and_offsets() {
        let s = MlpShape::new(3, &[4, 5], 2);
        assert_eq!(s.n_params(), 3 * 4 + 4 + 4 * 5 + 5 + 5 * 2 + 2);
        assert_eq!(s.offsets(0), (0, 12));
        assert_eq!(s.offsets(1), (16, 36));
        assert_eq!(s.offsets(2), (41, 51));
    }

    #[test]
    fn zero_params_give_zero_output() {
        let s = MlpShape::new(5, &[64, 64], 3);
        let out = s.forward(&vec![0.0; s.n_params()], &[1.0, -2.0, 0.5, 3.0, 0.0]);
        assert_eq!(out.output(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn orthogonal_rows_and_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (r, c) in [(4, 9), (9, 4), (6, 6)] {
            let q = orthogonal(&mut rng, r, c);
            let gram = if r < c { &q * q.transpose() } else { q.transpose() * &q };
            let eye = DMatrix::<f64>::identity(r.min(c), r.min(c));
            assert!((gram - eye).amax() < 1e-12);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = MlpShape::new(4, &[6, 5], 3);
        let params: Vec<f64> = (0..s.n_params()).map(|_| rng.sample::<f64, _>(StandardNormal) * 0.5).collect();
        let x = [0.3, -1.2, 0.8, 0.1];
        let weights = [0.7, -1.1, 0.4];
        let loss = |p: &[f64]| -> f64 { s.forward(p, &x).output().iter().zip(&weights).map(|(o, w)| o * w).sum() };
        let mut grad = vec![0.0; s.n_params()];
        s.backward(&params, &s.forward(&params, &x), &weights, &mut grad);
        let h = 1e-5;
        for i in 0..params.len() {
            let mut p = params.clone();
            p[i] += h;
            let up = loss(&p);
            p[i] -= 2.0 * h;
            let fd = (up - loss(&p)) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-4 * fd.abs().max(1e-6), "param {i}: {fd} vs {}", grad[i]);
        }
    }
}
