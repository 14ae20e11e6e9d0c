//! Single-layer LSTM regressor trained with backpropagation through time.
//!
//! The network reads one scalar per time step and maps the final hidden state
//! through one affine unit to a scalar prediction. Gates are ordered
//! input, forget, candidate, output.

use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::math::{mean, sigmoid, sqrt, std_dev, tanh};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LstmParams {
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for LstmParams {
    fn default() -> Self {
        Self {
            hidden: 32,
            epochs: 100,
            lr: 1e-2,
            batch: 64,
            clip_norm: 5.0,
            seed: 0,
        }
    }
}

/// Flat parameter vector with named offsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmNet {
    pub hidden: usize,
    pub params: Vec<f64>,
}

/// Offsets into the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    h: usize,
    w_x: usize,
    w_h: usize,
    bias: usize,
    w_out: usize,
    b_out: usize,
    len: usize,
}

impl Layout {
    fn new(h: usize) -> Self {
        let w_x = 0;
        let w_h = w_x + 4 * h;
        let bias = w_h + 4 * h * h;
        let w_out = bias + 4 * h;
        let b_out = w_out + h;
        Self {
            h,
            w_x,
            w_h,
            bias,
            w_out,
            b_out,
            len: b_out + 1,
        }
    }
}

/// Per-step activations kept for the backward pass.
struct Trace {
    gates: Vec<[f64; 4]>, // flattened per (t, unit): i, f, g, o
    c: Vec<f64>,          // (T+1) x H, row 0 is the initial state
    h: Vec<f64>,          // (T+1) x H
}

impl LstmNet {
    pub fn new(hidden: usize, seed: u64) -> Self {
        let layout = Layout::new(hidden);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / sqrt(hidden as f64);
        let mut params: Vec<f64> = (0..layout.len).map(|_| (rng.gen::<f64>() * 2.0 - 1.0) * bound).collect();
        for u in 0..hidden {
            params[layout.bias + u] = 0.0; // input gate
            params[layout.bias + hidden + u] = 1.0; // forget gate starts open
            params[layout.bias + 2 * hidden + u] = 0.0;
            params[layout.bias + 3 * hidden + u] = 0.0;
        }
        params[layout.b_out] = 0.0;
        Self { hidden, params }
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn layout(&self) -> Layout {
        Layout::new(self.hidden)
    }

    fn run(&self, seq: &[f64]) -> (f64, Trace) {
        let l = self.layout();
        let h = l.h;
        let p = &self.params;
        let steps = seq.len();
        let mut trace = Trace {
            gates: Vec::with_capacity(steps * h),
            c: vec![0.0; (steps + 1) * h],
            h: vec![0.0; (steps + 1) * h],
        };
        let mut z = vec![0.0; 4 * h];
        for (t, &x) in seq.iter().enumerate() {
            let h_prev = &trace.h[t * h..(t + 1) * h];
            for (r, zr) in z.iter_mut().enumerate() {
                let row = &p[l.w_h + r * h..l.w_h + (r + 1) * h];
                let rec: f64 = row.iter().zip(h_prev).map(|(a, b)| a * b).sum();
                *zr = p[l.w_x + r] * x + rec + p[l.bias + r];
            }
            for u in 0..h {
                let i = sigmoid(z[u]);
                let f = sigmoid(z[h + u]);
                let g = tanh(z[2 * h + u]);
                let o = sigmoid(z[3 * h + u]);
                let c = f * trace.c[t * h + u] + i * g;
                trace.c[(t + 1) * h + u] = c;
                trace.h[(t + 1) * h + u] = o * tanh(c);
                trace.gates.push([i, f, g, o]);
            }
        }
        let last = &trace.h[steps * h..(steps + 1) * h];
        let out: f64 = p[l.w_out..l.w_out + h].iter().zip(last).map(|(a, b)| a * b).sum::<f64>() + p[l.b_out];
        (out, trace)
    }

    pub fn forward(&self, seq: &[f64]) -> f64 {
        self.run(seq).0
    }

    /// Hidden state after the first step from a zero initial state.
    pub fn first_hidden(&self, x0: f64) -> Vec<f64> {
        let (_, trace) = self.run(&[x0]);
        trace.h[self.hidden..2 * self.hidden].to_vec()
    }

    /// Mean squared error over the batch and its gradient w.r.t. every parameter.
    pub fn loss_and_grad(&self, seqs: &[&[f64]], targets: &[f64]) -> (f64, Vec<f64>) {
        let l = self.layout();
        let h = l.h;
        let p = &self.params;
        let mut grad = vec![0.0; l.len];
        let mut loss = 0.0;
        let scale = 1.0 / seqs.len() as f64;
        let mut dz = vec![0.0; 4 * h];
        for (seq, &y) in seqs.iter().zip(targets) {
            let (out, tr) = self.run(seq);
            let err = out - y;
            loss += err * err * scale;
            let dout = 2.0 * err * scale;
            let steps = seq.len();
            let last = &tr.h[steps * h..(steps + 1) * h];
            for u in 0..h {
                grad[l.w_out + u] += dout * last[u];
            }
            grad[l.b_out] += dout;
            let mut dh: Vec<f64> = p[l.w_out..l.w_out + h].iter().map(|w| w * dout).collect();
            let mut dc = vec![0.0; h];
            for t in (0..steps).rev() {
                for u in 0..h {
                    let [i, f, g, o] = tr.gates[t * h + u];
                    let c = tr.c[(t + 1) * h + u];
                    let c_prev = tr.c[t * h + u];
                    let tc = tanh(c);
                    let d_o = dh[u] * tc;
                    let dcu = dc[u] + dh[u] * o * (1.0 - tc * tc);
                    let d_i = dcu * g;
                    let d_g = dcu * i;
                    let d_f = dcu * c_prev;
                    dc[u] = dcu * f;
                    dz[u] = d_i * i * (1.0 - i);
                    dz[h + u] = d_f * f * (1.0 - f);
                    dz[2 * h + u] = d_g * (1.0 - g * g);
                    dz[3 * h + u] = d_o * o * (1.0 - o);
                }
                let x = seq[t];
                let h_prev = &tr.h[t * h..(t + 1) * h];
                let mut dh_prev = vec![0.0; h];
                for r in 0..4 * h {
                    let d = dz[r];
                    if d == 0.0 {
                        continue;
                    }
                    grad[l.w_x + r] += d * x;
                    grad[l.bias + r] += d;
                    let row = l.w_h + r * h;
                    for u in 0..h {
                        grad[row + u] += d * h_prev[u];
                        dh_prev[u] += d * p[row + u];
                    }
                }
                dh = dh_prev;
            }
        }
        (loss, grad)
    }
}

/// Trained regressor with the input/target standardization it was fit under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmRegressor {
    pub net: LstmNet,
    x_mean: f64,
    x_std: f64,
    y_mean: f64,
    y_std: f64,
    pub epoch_losses: Vec<f64>,
}

fn safe_std(xs: &[f64]) -> f64 {
    let s = std_dev(xs);
    if s > 1e-12 {
        s
    } else {
        1.0
    }
}

impl LstmRegressor {
    pub fn fit(x: &[Vec<f64>], y: &[f64], params: &LstmParams) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::ShapeMismatch {
                expected: y.len(),
                found: x.len(),
            });
        }
        let len = x[0].len();
        if let Some(bad) = x.iter().find(|s| s.len() != len) {
            return Err(Error::ShapeMismatch {
                expected: len,
                found: bad.len(),
            });
        }
        let flat: Vec<f64> = x.iter().flatten().copied().collect();
        let x_mean = mean(&flat);
        let x_std = safe_std(&flat);
        let y_mean = mean(y);
        let y_std = safe_std(y);
        let xs: Vec<Vec<f64>> = x
            .iter()
            .map(|s| s.iter().map(|v| (v - x_mean) / x_std).collect())
            .collect();
        let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_std).collect();

        let mut net = LstmNet::new(params.hidden, params.seed);
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x5eed);
        let mut adam = Adam::new(net.param_count(), params.lr);
        let mut order: Vec<usize> = (0..xs.len()).collect();
        let mut epoch_losses = Vec::with_capacity(params.epochs);
        let batch = params.batch.max(1);
        for epoch in 0..params.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for chunk in order.chunks(batch) {
                let seqs: Vec<&[f64]> = chunk.iter().map(|&i| xs[i].as_slice()).collect();
                let tg: Vec<f64> = chunk.iter().map(|&i| ys[i]).collect();
                let (loss, mut grad) = net.loss_and_grad(&seqs, &tg);
                if !loss.is_finite() {
                    return Err(Error::Diverged { epoch });
                }
                total += loss * chunk.len() as f64;
                clip_global_norm(&mut grad, params.clip_norm);
                adam.step(&mut net.params, &grad);
            }
            let epoch_loss = total / xs.len() as f64;
            if !epoch_loss.is_finite() || net.params.iter().any(|p| !p.is_finite()) {
                return Err(Error::Diverged { epoch });
            }
            epoch_losses.push(epoch_loss * y_std * y_std);
        }
        Ok(Self {
            net,
            x_mean,
            x_std,
            y_mean,
            y_std,
            epoch_losses,
        })
    }

    pub fn predict(&self, seq: &[f64]) -> f64 {
        let scaled: Vec<f64> = seq.iter().map(|v| (v - self.x_mean) / self.x_std).collect();
        self.net.forward(&scaled) * self.y_std + self.y_mean
    }
}

fn clip_global_norm(grad: &mut [f64], max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let n = sqrt(grad.iter().map(|g| g * g).sum());
    if n > max_norm {
        let s = max_norm / n;
        grad.iter_mut().for_each(|g| *g *= s);
    }
}

struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(Self::B1, self.t as f64);
        let c2 = 1.0 - libm::pow(Self::B2, self.t as f64);
        for k in 0..params.len() {
            self.m[k] = Self::B1 * self.m[k] + (1.0 - Self::B1) * grad[k];
            self.v[k] = Self::B2 * self.v[k] + (1.0 - Self::B2) * grad[k] * grad[k];
            let mh = self.m[k] / c1;
            let vh = self.v[k] / c2;
            params[k] -= self.lr * mh / (sqrt(vh) + Self::EPS);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_ignores_recurrent_weights() {
        let a = LstmNet::new(4, 1);
        let mut b = a.clone();
        let l = a.layout();
        for k in l.w_h..l.bias {
            b.params[k] += 0.37;
        }
        assert_eq!(a.first_hidden(0.8), b.first_hidden(0.8));
        // but a second step does depend on them
        assert_ne!(a.forward(&[0.8, 0.1]), b.forward(&[0.8, 0.1]));
    }

    #[test]
    fn memorizes_single_sample() {
        let x = vec![vec![0.1, 0.3, -0.2, 0.5, 0.05]];
        let y = [0.42];
        let p = LstmParams {
            hidden: 8,
            epochs: 500,
            ..Default::default()
        };
        let m = LstmRegressor::fit(&x, &y, &p).unwrap();
        let e = m.predict(&x[0]) - y[0];
        assert!(e * e <= 1e-3, "squared error {}", e * e);
    }

    #[test]
    fn diverging_lr_is_reported() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64; 3]).collect();
        let y: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let p = LstmParams {
            hidden: 2,
            epochs: 3,
            lr: f64::NAN,
            clip_norm: 0.0,
            ..Default::default()
        };
        assert!(matches!(LstmRegressor::fit(&x, &y, &p), Err(Error::Diverged { epoch: 0 })));
    }

    #[test]
    fn ragged_input_rejected() {
        let x = vec![vec![1.0, 2.0], vec![1.0]];
        assert!(LstmRegressor::fit(&x, &[1.0, 2.0], &LstmParams::default()).is_err());
    }
}
