//! Single-layer LSTM with a tanh position head, forward pass with dropout
//! and backpropagation through time.
//!
//! Parameters live in one flat vector laid out as
//! `[W (4H x F) | U (4H x H) | b (4H) | w_head (H) | b_head]`, matrices
//! row-major, gate blocks ordered input, forget, cell, output.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DmnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LstmHyperparams {
    pub dropout: f64,
    pub hidden_size: usize,
    /// Minibatch size in sequences.
    pub minibatch_size: usize,
    pub learning_rate: f64,
    pub max_grad_norm: f64,
    /// Changepoint lookback used for the inputs, `None` without changepoint features.
    pub cpd_lookback: Option<usize>,
}

impl Default for LstmHyperparams {
    fn default() -> Self {
        Self {
            dropout: 0.3,
            hidden_size: 20,
            minibatch_size: 64,
            learning_rate: 1e-3,
            max_grad_norm: 1.0,
            cpd_lookback: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub input_size: usize,
    pub hidden_size: usize,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    f: usize,
    h: usize,
    w: usize,
    u: usize,
    b: usize,
    head_w: usize,
    head_b: usize,
    len: usize,
}

impl Layout {
    fn new(f: usize, h: usize) -> Self {
        let w = 0;
        let u = w + 4 * h * f;
        let b = u + 4 * h * h;
        let head_w = b + 4 * h;
        let head_b = head_w + h;
        Self { f, h, w, u, b, head_w, head_b, len: head_b + 1 }
    }
}

pub fn parameter_count(input_size: usize, hidden_size: usize) -> usize {
    Layout::new(input_size, hidden_size).len
}

/// Dropout masks for one sequence; entries are 0 or `1 / (1 - rate)`.
#[derive(Debug, Clone)]
pub struct DropoutMasks {
    /// Shared across time steps.
    pub input: Vec<f64>,
    /// One mask per step over the hidden output.
    pub output: Vec<Vec<f64>>,
}

impl DropoutMasks {
    pub fn sample<R: Rng>(rng: &mut R, rate: f64, input_size: usize, hidden_size: usize, steps: usize) -> Self {
        let keep = 1.0 - rate;
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n).map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect()
        };
        let input = draw(input_size);
        let output = (0..steps).map(|_| draw(hidden_size)).collect();
        Self { input, output }
    }
}

/// Intermediate values of a forward pass needed for the backward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    x: Vec<Vec<f64>>,
    gates: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
    out_mask: Option<Vec<Vec<f64>>>,
    pub positions: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Lstm {
    /// Uniform `+-1/sqrt(H)` weights, zero biases except forget gate +1,
    /// zero head bias.
    pub fn new(input_size: usize, hidden_size: usize, seed: u64) -> Self {
        let lay = Layout::new(input_size, hidden_size);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (hidden_size as f64).sqrt();
        let mut params = vec![0.0; lay.len];
        for p in &mut params[lay.w..lay.b] {
            *p = rng.random_range(-bound..bound);
        }
        for p in &mut params[lay.b + hidden_size..lay.b + 2 * hidden_size] {
            *p = 1.0;
        }
        for p in &mut params[lay.head_w..lay.head_b] {
            *p = rng.random_range(-bound..bound);
        }
        Self { input_size, hidden_size, params }
    }

    pub fn from_params(input_size: usize, hidden_size: usize, params: Vec<f64>) -> Option<Self> {
        (params.len() == parameter_count(input_size, hidden_size)).then_some(Self { input_size, hidden_size, params })
    }

    fn layout(&self) -> Layout {
        Layout::new(self.input_size, self.hidden_size)
    }

    /// Number of steps in a `steps x F` input, or an error on a width mismatch.
    pub fn steps_of(&self, inputs: &[f64]) -> Result<usize, DmnError> {
        if inputs.is_empty() || !inputs.len().is_multiple_of(self.input_size) {
            return Err(DmnError::Dimension { expected: self.input_size, len: inputs.len() });
        }
        Ok(inputs.len() / self.input_size)
    }

    /// Deterministic positions for a `steps x F` row-major input.
    pub fn predict(&self, inputs: &[f64]) -> Vec<f64> {
        self.forward(inputs, None).positions
    }

    /// Position emitted at the final step.
    pub fn predict_last(&self, inputs: &[f64]) -> f64 {
        *self.predict(inputs).last().expect("empty sequence")
    }

    pub fn forward(&self, inputs: &[f64], masks: Option<&DropoutMasks>) -> Trace {
        let Layout { f, h, w, u, b, head_w, head_b, .. } = self.layout();
        assert_eq!(inputs.len() % f, 0, "input length must be a multiple of the feature count");
        let steps = inputs.len() / f;
        let p = &self.params;
        let mut trace = Trace {
            x: Vec::with_capacity(steps),
            gates: Vec::with_capacity(steps),
            c: Vec::with_capacity(steps),
            h: Vec::with_capacity(steps),
            out_mask: masks.map(|m| m.output.clone()),
            positions: Vec::with_capacity(steps),
        };
        let mut h_prev = vec![0.0; h];
        let mut c_prev = vec![0.0; h];
        for t in 0..steps {
            let mut x = inputs[t * f..(t + 1) * f].to_vec();
            if let Some(m) = masks {
                for (xi, mi) in x.iter_mut().zip(&m.input) {
                    *xi *= mi;
                }
            }
            let mut z = p[b..b + 4 * h].to_vec();
            for (r, zr) in z.iter_mut().enumerate() {
                let wr = &p[w + r * f..w + (r + 1) * f];
                let ur = &p[u + r * h..u + (r + 1) * h];
                *zr += wr.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>()
                    + ur.iter().zip(&h_prev).map(|(a, b)| a * b).sum::<f64>();
            }
            let mut gates = vec![0.0; 4 * h];
            let mut c = vec![0.0; h];
            let mut hh = vec![0.0; h];
            for j in 0..h {
                let ig = sigmoid(z[j]);
                let fg = sigmoid(z[h + j]);
                let gg = z[2 * h + j].tanh();
                let og = sigmoid(z[3 * h + j]);
                gates[j] = ig;
                gates[h + j] = fg;
                gates[2 * h + j] = gg;
                gates[3 * h + j] = og;
                c[j] = fg * c_prev[j] + ig * gg;
                hh[j] = og * c[j].tanh();
            }
            let mut a = p[head_b];
            for j in 0..h {
                let m = masks.map_or(1.0, |m| m.output[t][j]);
                a += p[head_w + j] * hh[j] * m;
            }
            trace.positions.push(a.tanh());
            trace.x.push(x);
            trace.gates.push(gates);
            h_prev.clone_from(&hh);
            c_prev.clone_from(&c);
            trace.c.push(c);
            trace.h.push(hh);
        }
        trace
    }

    /// Gradient of the loss w.r.t. the parameters given `d loss / d position`
    /// at every step of `trace`.
    pub fn backward(&self, trace: &Trace, d_pos: &[f64]) -> Vec<f64> {
        let Layout { f, h, w, u, b, head_w, head_b, len } = self.layout();
        let p = &self.params;
        let steps = trace.positions.len();
        assert_eq!(d_pos.len(), steps);
        let mut g = vec![0.0; len];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let zeros = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];
        for t in (0..steps).rev() {
            let x_pos = trace.positions[t];
            let da = d_pos[t] * (1.0 - x_pos * x_pos);
            let hh = &trace.h[t];
            let c = &trace.c[t];
            let c_prev = if t > 0 { &trace.c[t - 1] } else { &zeros };
            let h_prev = if t > 0 { &trace.h[t - 1] } else { &zeros };
            let gates = &trace.gates[t];
            g[head_b] += da;
            for j in 0..h {
                let m = trace.out_mask.as_ref().map_or(1.0, |m| m[t][j]);
                g[head_w + j] += da * hh[j] * m;
                let dh = da * p[head_w + j] * m + dh_next[j];
                let (ig, fg, gg, og) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                let tc = c[j].tanh();
                let d_o = dh * tc;
                let dc = dh * og * (1.0 - tc * tc) + dc_next[j];
                let di = dc * gg;
                let dg = dc * ig;
                let df = dc * c_prev[j];
                dc_next[j] = dc * fg;
                dz[j] = di * ig * (1.0 - ig);
                dz[h + j] = df * fg * (1.0 - fg);
                dz[2 * h + j] = dg * (1.0 - gg * gg);
                dz[3 * h + j] = d_o * og * (1.0 - og);
            }
            let x = &trace.x[t];
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            for (r, &dzr) in dz.iter().enumerate() {
                if dzr == 0.0 {
                    continue;
                }
                g[b + r] += dzr;
                for (gw, xv) in g[w + r * f..w + (r + 1) * f].iter_mut().zip(x) {
                    *gw += dzr * xv;
                }
                let ur = &p[u + r * h..u + (r + 1) * h];
                for k in 0..h {
                    g[u + r * h + k] += dzr * h_prev[k];
                    dh_next[k] += dzr * ur[k];
                }
            }
        }
        g
    }

    /// Named slices of the parameter vector: input weights, recurrent
    /// weights, gate biases, head weights, head bias.
    pub fn tensors(&self) -> [(&'static str, &[f64]); 5] {
        let l = self.layout();
        let p = &self.params;
        [
            ("w_input", &p[l.w..l.u]),
            ("w_recurrent", &p[l.u..l.b]),
            ("bias", &p[l.b..l.head_w]),
            ("w_head", &p[l.head_w..l.head_b]),
            ("b_head", &p[l.head_b..l.len]),
        ]
    }
}
