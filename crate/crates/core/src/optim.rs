//! Limited-memory quasi-Newton minimization under simple bounds.
//!
//! A projected L-BFGS: search directions come from the usual two-loop
//! recursion restricted to the free variables, and trial points are
//! projected back onto the box before the Armijo test.

use std::collections::VecDeque;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OptimError {
    #[error("objective could not be evaluated at the starting point")]
    InitialEvaluation,
    #[error("bounds are inconsistent: {0}")]
    Bounds(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop when the projected gradient's infinity norm drops below this.
    pub pg_tol: f64,
    /// Stop when `(f_k - f_{k+1}) / max(|f_k|, |f_{k+1}|, 1)` drops below this.
    pub rel_f_tol: f64,
    pub max_backtracks: usize,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iter: 200,
            pg_tol: 1e-5,
            rel_f_tol: 1e-9,
            max_backtracks: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ProjectedGradient,
    RelativeReduction,
    MaxIterations,
    LineSearch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub f_init: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

impl Minimum {
    pub fn converged(&self) -> bool {
        matches!(
            self.termination,
            Termination::ProjectedGradient | Termination::RelativeReduction
        )
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Minimize `f` over the box `[lower, upper]` starting from `x0` (clamped
/// into the box). `f` returns the value and gradient, or `None` where it
/// cannot be evaluated; such points are rejected by the line search.
///
/// The returned value never exceeds the value at the (clamped) start.
pub fn minimize<F>(
    mut f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &Options,
) -> Result<Minimum, OptimError>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    if lower.len() != n || upper.len() != n {
        return Err(OptimError::Bounds("dimension mismatch".into()));
    }
    if let Some(i) = (0..n).find(|&i| lower[i].is_nan() || upper[i].is_nan() || lower[i] > upper[i]) {
        return Err(OptimError::Bounds(format!("lower[{i}] > upper[{i}]")));
    }
    let project = |x: &mut [f64]| {
        for i in 0..n {
            x[i] = x[i].clamp(lower[i], upper[i]);
        }
    };

    let mut x = x0.to_vec();
    project(&mut x);
    let (mut fx, mut g) = match f(&x) {
        Some((v, g)) if v.is_finite() && g.iter().all(|d| d.is_finite()) => (v, g),
        _ => return Err(OptimError::InitialEvaluation),
    };
    let f_init = fx;
    let mut evaluations = 1;
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();

    let projected_grad_norm = |x: &[f64], g: &[f64]| {
        (0..n)
            .map(|i| ((x[i] - g[i]).clamp(lower[i], upper[i]) - x[i]).abs())
            .fold(0.0, f64::max)
    };

    let mut iterations = 0;
    let termination = loop {
        if projected_grad_norm(&x, &g) < opts.pg_tol {
            break Termination::ProjectedGradient;
        }
        if iterations >= opts.max_iter {
            break Termination::MaxIterations;
        }
        iterations += 1;

        // variables pinned at a bound with the gradient pushing outward
        let active: Vec<bool> = (0..n)
            .map(|i| (x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0))
            .collect();
        let mask = |v: &mut [f64]| {
            for i in 0..n {
                if active[i] {
                    v[i] = 0.0;
                }
            }
        };

        let mut accepted = None;
        for attempt in 0..2 {
            if attempt == 1 {
                if memory.is_empty() {
                    break;
                }
                memory.clear();
            }
            let mut d = two_loop(&g, &memory, &active);
            mask(&mut d);
            if dot(&d, &g) >= 0.0 {
                memory.clear();
                d = g.iter().map(|v| -v).collect();
                mask(&mut d);
            }
            let mut step = if memory.is_empty() {
                (1.0 / inf_norm(&d).max(1e-12)).min(1.0)
            } else {
                1.0
            };
            for _ in 0..opts.max_backtracks {
                let mut xt: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
                project(&mut xt);
                let delta: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
                if inf_norm(&delta) == 0.0 {
                    break;
                }
                evaluations += 1;
                if let Some((ft, gt)) = f(&xt) {
                    let slope = dot(&g, &delta);
                    let sufficient = if slope < 0.0 {
                        ft <= fx + 1e-4 * slope
                    } else {
                        ft < fx
                    };
                    if ft.is_finite() && gt.iter().all(|v| v.is_finite()) && sufficient {
                        accepted = Some((xt, ft, gt, delta));
                        break;
                    }
                }
                step *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
        }

        let Some((xn, fnew, gn, s)) = accepted else {
            break Termination::LineSearch;
        };
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).max(1e-300) {
            if memory.len() == opts.memory {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }
        let rel = (fx - fnew) / fx.abs().max(fnew.abs()).max(1.0);
        x = xn;
        fx = fnew;
        g = gn;
        if rel < opts.rel_f_tol {
            break Termination::RelativeReduction;
        }
    };

    Ok(Minimum {
        x,
        f: fx,
        f_init,
        iterations,
        evaluations,
        termination,
    })
}

fn two_loop(g: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, active: &[bool]) -> Vec<f64> {
    let masked = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .zip(active)
            .map(|(x, a)| if *a { 0.0 } else { *x })
            .collect()
    };
    let mut q = masked(g);
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * dot(&masked(s), &q);
        for (qi, yi) in q.iter_mut().zip(masked(y)) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        let (sm, ym) = (masked(s), masked(y));
        let yy = dot(&ym, &ym);
        let sy = dot(&sm, &ym);
        if yy > 0.0 && sy > 0.0 {
            let gamma = sy / yy;
            q.iter_mut().for_each(|v| *v *= gamma);
        }
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(&masked(y), &q);
        for (qi, si) in q.iter_mut().zip(masked(s)) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Some((f, g))
    }

    #[test]
    fn unconstrained_rosenbrock() {
        let opts = Options { max_iter: 500, rel_f_tol: 0.0, pg_tol: 1e-8, ..Options::default() };
        let m = minimize(rosenbrock, &[-1.2, 1.0], &[-10.0; 2], &[10.0; 2], &opts).unwrap();
        assert!(m.converged());
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5, "{:?}", m);
    }

    #[test]
    fn active_bound() {
        // minimum of (x-3)^2 + (y+1)^2 on [0,2] x [0,2] is (2, 0)
        let f = |x: &[f64]| {
            Some((
                (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2),
                vec![2.0 * (x[0] - 3.0), 2.0 * (x[1] + 1.0)],
            ))
        };
        let m = minimize(f, &[1.0, 1.0], &[0.0; 2], &[2.0; 2], &Options::default()).unwrap();
        assert_eq!(m.termination, Termination::ProjectedGradient);
        assert!((m.x[0] - 2.0).abs() < 1e-12 && m.x[1].abs() < 1e-12);
    }

    #[test]
    fn start_is_clamped_and_never_worse() {
        let m = minimize(rosenbrock, &[5.0, -5.0], &[-2.0; 2], &[2.0; 2], &Options::default()).unwrap();
        assert!(m.f <= m.f_init);
    }

    #[test]
    fn failing_start_is_an_error() {
        let f = |_: &[f64]| None;
        assert_eq!(
            minimize(f, &[0.0], &[-1.0], &[1.0], &Options::default()).unwrap_err(),
            OptimError::InitialEvaluation
        );
    }

    #[test]
    fn undefined_region_is_avoided() {
        // f undefined for x > 0.5; minimum of (x-1)^2 restricted to the defined part is at 0.5
        let f = |x: &[f64]| (x[0] <= 0.5).then(|| ((x[0] - 1.0).powi(2), vec![2.0 * (x[0] - 1.0)]));
        let m = minimize(f, &[0.0], &[-1.0], &[1.0], &Options::default()).unwrap();
        assert!(m.x[0] <= 0.5 && m.x[0] > 0.4);
    }
}
