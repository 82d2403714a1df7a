//! Matérn-3/2, changepoint and region-switching covariance functions.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// `sigma_h^2 (1 + sqrt(3) d / lambda) exp(-sqrt(3) d / lambda)`.
pub fn matern32(d: f64, lambda: f64, sigma_h: f64) -> f64 {
    let a = SQRT3 * d.abs() / lambda;
    sigma_h * sigma_h * (1.0 + a) * (-a).exp()
}

/// Stationary Matérn-3/2 kernel without a noise term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Matern32 {
    pub lambda: f64,
    pub sigma_h: f64,
}

impl Matern32 {
    pub const UNIT: Self = Self {
        lambda: 1.0,
        sigma_h: 1.0,
    };

    pub fn eval(&self, x: f64, xp: f64) -> f64 {
        matern32(x - xp, self.lambda, self.sigma_h)
    }

    /// Value and derivatives with respect to `ln lambda` and `ln sigma_h`.
    pub(crate) fn eval_with_grad(&self, x: f64, xp: f64) -> (f64, f64, f64) {
        let a = SQRT3 * (x - xp).abs() / self.lambda;
        let s2 = self.sigma_h * self.sigma_h;
        let e = (-a).exp();
        let k = s2 * (1.0 + a) * e;
        (k, s2 * a * a * e, 2.0 * k)
    }
}

/// Matérn-3/2 GP hyperparameters: length-scale, output scale and noise std.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaternHypers {
    pub lambda: f64,
    pub sigma_h: f64,
    pub sigma_n: f64,
}

impl MaternHypers {
    pub const UNIT: Self = Self {
        lambda: 1.0,
        sigma_h: 1.0,
        sigma_n: 1.0,
    };

    pub fn kernel(&self) -> Matern32 {
        Matern32 {
            lambda: self.lambda,
            sigma_h: self.sigma_h,
        }
    }
}

/// Changepoint GP hyperparameters. `before` governs inputs below `c`,
/// `after` inputs above it; `s` is the sigmoid steepness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangepointHypers {
    pub before: Matern32,
    pub after: Matern32,
    pub c: f64,
    pub s: f64,
    pub sigma_n: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Returns `(sigma(x) sigma(x'), (1 - sigma(x)) (1 - sigma(x')))` with
/// `sigma(x) = 1 / (1 + exp(-s (x - c)))`.
pub fn sigmoid_blend(x: f64, xp: f64, c: f64, s: f64) -> (f64, f64) {
    let (a, b) = (sigmoid(s * (x - c)), sigmoid(s * (xp - c)));
    (a * b, (1.0 - a) * (1.0 - b))
}

/// Sigmoid-blended changepoint kernel. Far below `c` it reduces to the
/// `before` kernel, far above it to `after`, and across `c` to zero.
pub fn changepoint_kernel(x: f64, xp: f64, h: &ChangepointHypers) -> f64 {
    let (up, down) = sigmoid_blend(x, xp, h.c, h.s);
    h.before.eval(x, xp) * down + h.after.eval(x, xp) * up
}

/// Hard switch at `c`: `before` if both inputs are below `c`, `after` if
/// both are at or above it, zero otherwise.
pub fn region_switch_kernel(x: f64, xp: f64, before: &Matern32, after: &Matern32, c: f64) -> f64 {
    match (x < c, xp < c) {
        (true, true) => before.eval(x, xp),
        (false, false) => after.eval(x, xp),
        _ => 0.0,
    }
}

/// Noisy covariance `K + sigma_n^2 I` for an arbitrary kernel closure.
pub fn noisy_covariance(xs: &[f64], sigma_n: f64, k: impl Fn(f64, f64) -> f64) -> DMatrix<f64> {
    let n = xs.len();
    let mut v = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let kij = k(xs[i], xs[j]);
            v[(i, j)] = kij;
            v[(j, i)] = kij;
        }
        v[(i, i)] += sigma_n * sigma_n;
    }
    v
}

/// Matérn noisy covariance and its derivatives with respect to
/// `(ln lambda, ln sigma_h, ln sigma_n)`.
pub(crate) fn matern_cov_grad(xs: &[f64], h: &MaternHypers) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
    let n = xs.len();
    let kern = h.kernel();
    let mut v = DMatrix::zeros(n, n);
    let mut grads = vec![DMatrix::zeros(n, n); 3];
    let noise = h.sigma_n * h.sigma_n;
    for i in 0..n {
        for j in 0..=i {
            let (k, dl, ds) = kern.eval_with_grad(xs[i], xs[j]);
            v[(i, j)] = k;
            v[(j, i)] = k;
            grads[0][(i, j)] = dl;
            grads[0][(j, i)] = dl;
            grads[1][(i, j)] = ds;
            grads[1][(j, i)] = ds;
        }
        v[(i, i)] += noise;
        grads[2][(i, i)] = 2.0 * noise;
    }
    (v, grads)
}

/// Changepoint noisy covariance and derivatives with respect to
/// `(ln lambda_1, ln sigma_h1, ln lambda_2, ln sigma_h2, c, ln s, ln sigma_n)`.
pub(crate) fn changepoint_cov_grad(
    xs: &[f64],
    h: &ChangepointHypers,
) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
    let n = xs.len();
    let sig: Vec<f64> = xs.iter().map(|&x| sigmoid(h.s * (x - h.c))).collect();
    // d sigma / dc and d sigma / d ln s
    let dsig_c: Vec<f64> = sig.iter().map(|&p| -h.s * p * (1.0 - p)).collect();
    let dsig_s: Vec<f64> = xs
        .iter()
        .zip(&sig)
        .map(|(&x, &p)| h.s * (x - h.c) * p * (1.0 - p))
        .collect();
    let mut v = DMatrix::zeros(n, n);
    let mut grads = vec![DMatrix::zeros(n, n); 7];
    let noise = h.sigma_n * h.sigma_n;
    for i in 0..n {
        for j in 0..=i {
            let (k1, dl1, ds1) = h.before.eval_with_grad(xs[i], xs[j]);
            let (k2, dl2, ds2) = h.after.eval_with_grad(xs[i], xs[j]);
            let (pi, pj) = (sig[i], sig[j]);
            let up = pi * pj;
            let down = (1.0 - pi) * (1.0 - pj);
            let dup = |di: f64, dj: f64| di * pj + pi * dj;
            let ddown = |di: f64, dj: f64| -di * (1.0 - pj) - (1.0 - pi) * dj;
            let vals = [
                dl1 * down,
                ds1 * down,
                dl2 * up,
                ds2 * up,
                k1 * ddown(dsig_c[i], dsig_c[j]) + k2 * dup(dsig_c[i], dsig_c[j]),
                k1 * ddown(dsig_s[i], dsig_s[j]) + k2 * dup(dsig_s[i], dsig_s[j]),
            ];
            let k = k1 * down + k2 * up;
            v[(i, j)] = k;
            v[(j, i)] = k;
            for (g, val) in grads.iter_mut().zip(vals) {
                g[(i, j)] = val;
                g[(j, i)] = val;
            }
        }
        v[(i, i)] += noise;
        grads[6][(i, i)] = 2.0 * noise;
    }
    (v, grads)
}
