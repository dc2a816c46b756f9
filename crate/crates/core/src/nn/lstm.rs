//! Single LSTM layer with exact backward pass.
//!
//! Gate rows are stacked in the order input, forget, cell, output, so the
//! pre-activation is `z = W_ih x + W_hh h + b` with `z` of length `4H`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    pub w_ih: Matrix,
    pub w_hh: Matrix,
    pub bias: Vec<f64>,
}

/// Recurrent state of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LayerState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone)]
pub(crate) struct LstmCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Activated gates `[i, f, g, o]`.
    pub gates: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl LstmLayer {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_ih: Matrix::zeros(4 * hidden, input),
            w_hh: Matrix::zeros(4 * hidden, hidden),
            bias: vec![0.0; 4 * hidden],
        }
    }

    /// Input weights uniform in `±1/sqrt(fan_in)`, recurrent gate blocks
    /// orthogonal, forget-gate bias 1.
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        let w_ih = Matrix::from_fn(4 * hidden, input, |_, _| rng.random_range(-bound..bound));
        let mut w_hh = Matrix::zeros(4 * hidden, hidden);
        for gate in 0..4 {
            let block = orthogonal(hidden, rng);
            for r in 0..hidden {
                for c in 0..hidden {
                    w_hh.set(gate * hidden + r, c, block.get(r, c));
                }
            }
        }
        let mut bias = vec![0.0; 4 * hidden];
        bias[hidden..2 * hidden].fill(1.0);
        Self { w_ih, w_hh, bias }
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.cols()
    }

    pub fn input(&self) -> usize {
        self.w_ih.cols()
    }

    pub(crate) fn forward(&self, x: &[f64], prev: &LayerState) -> (LayerState, LstmCache) {
        let hd = self.hidden();
        let mut z = self.bias.clone();
        self.w_ih.matvec_add(x, &mut z);
        self.w_hh.matvec_add(&prev.h, &mut z);

        for v in &mut z[..2 * hd] {
            *v = sigmoid(*v);
        }
        for v in &mut z[2 * hd..3 * hd] {
            *v = v.tanh();
        }
        for v in &mut z[3 * hd..] {
            *v = sigmoid(*v);
        }
        let (i, rest) = z.split_at(hd);
        let (f, rest) = rest.split_at(hd);
        let (g, o) = rest.split_at(hd);

        let mut c = vec![0.0; hd];
        let mut h = vec![0.0; hd];
        let mut tanh_c = vec![0.0; hd];
        for j in 0..hd {
            c[j] = f[j] * prev.c[j] + i[j] * g[j];
            tanh_c[j] = c[j].tanh();
            h[j] = o[j] * tanh_c[j];
        }
        let cache = LstmCache {
            x: x.to_vec(),
            h_prev: prev.h.clone(),
            c_prev: prev.c.clone(),
            gates: z,
            tanh_c,
        };
        (LayerState { h, c }, cache)
    }

    /// Backpropagates one step. `dh`/`dc` are gradients w.r.t. this step's
    /// outputs; returns gradients w.r.t. `(x, h_prev, c_prev)` and
    /// accumulates parameter gradients into `grad`.
    pub(crate) fn backward(
        &self,
        cache: &LstmCache,
        dh: &[f64],
        dc: &[f64],
        grad: &mut LstmLayer,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let hd = self.hidden();
        let g = &cache.gates;
        let mut dz = vec![0.0; 4 * hd];
        let mut dc_prev = vec![0.0; hd];
        for j in 0..hd {
            let (ig, fg, cg, og) = (g[j], g[hd + j], g[2 * hd + j], g[3 * hd + j]);
            let tc = cache.tanh_c[j];
            let dct = dc[j] + dh[j] * og * (1.0 - tc * tc);
            dz[j] = dct * cg * ig * (1.0 - ig);
            dz[hd + j] = dct * cache.c_prev[j] * fg * (1.0 - fg);
            dz[2 * hd + j] = dct * ig * (1.0 - cg * cg);
            dz[3 * hd + j] = dh[j] * tc * og * (1.0 - og);
            dc_prev[j] = dct * fg;
        }
        grad.w_ih.add_outer(&dz, &cache.x);
        grad.w_hh.add_outer(&dz, &cache.h_prev);
        for (b, d) in grad.bias.iter_mut().zip(&dz) {
            *b += d;
        }
        let mut dx = vec![0.0; self.input()];
        self.w_ih.matvec_t_add(&dz, &mut dx);
        let mut dh_prev = vec![0.0; hd];
        self.w_hh.matvec_t_add(&dz, &mut dh_prev);
        (dx, dh_prev, dc_prev)
    }
}

/// Square orthogonal matrix from modified Gram-Schmidt on a Gaussian draw.
pub(crate) fn orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Matrix {
    let mut rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| StandardNormal.sample(rng)).collect())
        .collect();
    for i in 0..n {
        for j in 0..i {
            let (done, cur) = rows.split_at_mut(i);
            let proj = super::matrix::dot(&cur[0], &done[j]);
            super::matrix::axpy(-proj, &done[j], &mut cur[0]);
        }
        let norm = super::matrix::dot(&rows[i], &rows[i]).sqrt();
        rows[i].iter_mut().for_each(|v| *v /= norm);
    }
    Matrix::from_fn(n, n, |r, c| rows[r][c])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn orthogonal_rows() {
        let m = orthogonal(16, &mut ChaCha8Rng::seed_from_u64(9));
        for i in 0..16 {
            for j in 0..16 {
                let d = super::super::matrix::dot(m.row(i), m.row(j));
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forget_bias_is_one() {
        let layer = LstmLayer::init(2, 4, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(&layer.bias[4..8], &[1.0; 4]);
        assert!(layer.bias[..4].iter().chain(&layer.bias[8..]).all(|&b| b == 0.0));
    }
}
