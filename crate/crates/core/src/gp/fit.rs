//! Type-II maximum likelihood fits of the Matérn and changepoint GPs.

use serde::{Deserialize, Serialize};

use super::kernel::{changepoint_cov_grad, matern_cov_grad, ChangepointHypers, Matern32, MaternHypers};
use super::likelihood::nlml_with_grad;
use super::GpError;
use crate::data::StandardizedWindow;
use crate::optim::{self, Options};

/// Box bounds on the positive hyperparameters (natural units).
pub const LENGTH_SCALE_BOUNDS: (f64, f64) = (1e-2, 1e4);
pub const OUTPUT_SCALE_BOUNDS: (f64, f64) = (1e-4, 1e2);
pub const NOISE_BOUNDS: (f64, f64) = (1e-3, 1e2);
pub const STEEPNESS_BOUNDS: (f64, f64) = (1e-2, 1e3);
/// Changepoint location is kept `margin * l` away from the window ends.
pub const LOCATION_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpFit<H> {
    pub hypers: H,
    /// Negative log marginal likelihood at `hypers` (nats).
    pub nlml: f64,
    /// Negative log marginal likelihood at the initialization.
    pub init_nlml: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChangepointFit {
    pub fit: GpFit<ChangepointHypers>,
    /// The first attempt failed and the fit came from the unit re-initialization.
    pub reinitialized: bool,
}

fn log_bounds(b: (f64, f64)) -> (f64, f64) {
    (b.0.ln(), b.1.ln())
}

fn matern_from(theta: &[f64]) -> MaternHypers {
    MaternHypers {
        lambda: theta[0].exp(),
        sigma_h: theta[1].exp(),
        sigma_n: theta[2].exp(),
    }
}

fn matern_theta(h: &MaternHypers) -> Vec<f64> {
    vec![h.lambda.ln(), h.sigma_h.ln(), h.sigma_n.ln()]
}

fn changepoint_from(theta: &[f64]) -> ChangepointHypers {
    ChangepointHypers {
        before: Matern32 { lambda: theta[0].exp(), sigma_h: theta[1].exp() },
        after: Matern32 { lambda: theta[2].exp(), sigma_h: theta[3].exp() },
        c: theta[4],
        s: theta[5].exp(),
        sigma_n: theta[6].exp(),
    }
}

fn changepoint_theta(h: &ChangepointHypers) -> Vec<f64> {
    vec![
        h.before.lambda.ln(),
        h.before.sigma_h.ln(),
        h.after.lambda.ln(),
        h.after.sigma_h.ln(),
        h.c,
        h.s.ln(),
        h.sigma_n.ln(),
    ]
}

/// Fit the Matérn-3/2 GP with every hyperparameter initialized to 1.
pub fn fit_matern(window: &StandardizedWindow) -> Result<GpFit<MaternHypers>, GpError> {
    fit_matern_from(window, MaternHypers::UNIT)
}

pub fn fit_matern_from(
    window: &StandardizedWindow,
    init: MaternHypers,
) -> Result<GpFit<MaternHypers>, GpError> {
    let xs = window.time_index();
    let y = &window.values;
    let (ll, lu) = log_bounds(LENGTH_SCALE_BOUNDS);
    let (sl, su) = log_bounds(OUTPUT_SCALE_BOUNDS);
    let (nl, nu) = log_bounds(NOISE_BOUNDS);
    let objective = |theta: &[f64]| {
        let (v, dv) = matern_cov_grad(&xs, &matern_from(theta));
        nlml_with_grad(y, &v, &dv).ok()
    };
    let m = optim::minimize(
        objective,
        &matern_theta(&init),
        &[ll, sl, nl],
        &[lu, su, nu],
        &Options::default(),
    )?;
    Ok(GpFit {
        hypers: matern_from(&m.x),
        nlml: m.f,
        init_nlml: m.f_init,
        converged: m.converged(),
        iterations: m.iterations,
    })
}

/// Bounds on the window-local changepoint location for lookback `l`.
pub fn location_bounds(lookback: usize) -> (f64, f64) {
    let l = lookback as f64;
    (LOCATION_MARGIN * l, l - LOCATION_MARGIN * l)
}

pub fn fit_changepoint_from(
    window: &StandardizedWindow,
    init: ChangepointHypers,
) -> Result<GpFit<ChangepointHypers>, GpError> {
    let xs = window.time_index();
    let y = &window.values;
    let (ll, lu) = log_bounds(LENGTH_SCALE_BOUNDS);
    let (sl, su) = log_bounds(OUTPUT_SCALE_BOUNDS);
    let (nl, nu) = log_bounds(NOISE_BOUNDS);
    let (kl, ku) = log_bounds(STEEPNESS_BOUNDS);
    let (cl, cu) = location_bounds(window.lookback);
    let objective = |theta: &[f64]| {
        let (v, dv) = changepoint_cov_grad(&xs, &changepoint_from(theta));
        nlml_with_grad(y, &v, &dv).ok()
    };
    let m = optim::minimize(
        objective,
        &changepoint_theta(&init),
        &[ll, sl, ll, sl, cl, kl, nl],
        &[lu, su, lu, su, cu, ku, nu],
        &Options::default(),
    )?;
    if !m.f.is_finite() {
        return Err(GpError::NonFinite);
    }
    Ok(GpFit {
        hypers: changepoint_from(&m.x),
        nlml: m.f,
        init_nlml: m.f_init,
        converged: m.converged(),
        iterations: m.iterations,
    })
}

/// Fit the changepoint GP. Both sub-kernels and the noise start from the
/// Matérn fit, with `c` at the window midpoint and `s = 1`; if that fails
/// the fit is retried once from unit hyperparameters (again with `c` at the
/// midpoint).
pub fn fit_changepoint(
    window: &StandardizedWindow,
    matern: &GpFit<MaternHypers>,
) -> Result<ChangepointFit, GpError> {
    let mid = window.lookback as f64 / 2.0;
    let k = matern.hypers.kernel();
    let primary = ChangepointHypers {
        before: k,
        after: k,
        c: mid,
        s: 1.0,
        sigma_n: matern.hypers.sigma_n,
    };
    match fit_changepoint_from(window, primary) {
        Ok(fit) => Ok(ChangepointFit { fit, reinitialized: false }),
        Err(first) => {
            let unit = ChangepointHypers {
                before: Matern32::UNIT,
                after: Matern32::UNIT,
                c: mid,
                s: 1.0,
                sigma_n: 1.0,
            };
            fit_changepoint_from(window, unit)
                .map(|fit| ChangepointFit { fit, reinitialized: true })
                .map_err(|second| GpError::FitFailed(format!("{first}; retry: {second}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::standardize_values;
    use chrono::NaiveDate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    pub(crate) fn window(values: &[f64]) -> StandardizedWindow {
        StandardizedWindow {
            symbol: "T".into(),
            end_date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            lookback: values.len() - 1,
            values: standardize_values(values).unwrap(),
        }
    }

    fn noise(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, 1.0).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn white_noise_is_noise_dominated() {
        let mut sig_n = Vec::new();
        for seed in 0..10 {
            let w = window(&noise(seed, 60));
            let fit = fit_matern(&w).unwrap();
            assert!(fit.nlml <= fit.init_nlml + 1e-9);
            sig_n.push(fit.hypers.sigma_n);
        }
        sig_n.sort_by(f64::total_cmp);
        let median = sig_n[sig_n.len() / 2];
        assert!((median - 1.0).abs() < 0.2, "median sigma_n {median}");
    }

    #[test]
    fn smooth_signal_has_small_noise() {
        let tiny = noise(3, 60);
        let values: Vec<f64> = (0..60)
            .map(|i| (i as f64 * 2.0 * std::f64::consts::PI / 60.0).sin() + 1e-3 * tiny[i])
            .collect();
        let fit = fit_matern(&window(&values)).unwrap();
        assert!(fit.hypers.sigma_n < 0.1 * fit.hypers.sigma_h, "{:?}", fit.hypers);
    }

    #[test]
    fn planted_variance_jump_is_located() {
        let mut hits = Vec::new();
        for seed in 0..15 {
            let z = noise(100 + seed, 60);
            let values: Vec<f64> =
                z.iter().enumerate().map(|(i, v)| if i < 30 { 0.1 * v } else { *v }).collect();
            let w = window(&values);
            let m = fit_matern(&w).unwrap();
            let cp = fit_changepoint(&w, &m).unwrap();
            assert!(cp.fit.nlml <= cp.fit.init_nlml + 1e-9);
            hits.push(cp.fit.hypers.c);
        }
        hits.sort_by(f64::total_cmp);
        let median = hits[hits.len() / 2];
        assert!((median - 29.5).abs() < 0.15 * 59.0, "median c {median}");
    }

    #[test]
    fn stationary_window_gains_little() {
        let mut gains = Vec::new();
        for seed in 0..15 {
            let w = window(&noise(500 + seed, 40));
            let m = fit_matern(&w).unwrap();
            let cp = fit_changepoint(&w, &m).unwrap();
            gains.push((m.nlml - cp.fit.nlml).abs());
        }
        gains.sort_by(f64::total_cmp);
        assert!(gains[gains.len() / 2] < 3.0, "{gains:?}");
    }

    #[test]
    fn location_stays_inside_window() {
        let z = noise(9, 22);
        let values: Vec<f64> = z.iter().enumerate().map(|(i, v)| if i < 2 { 5.0 * v } else { 0.1 * v }).collect();
        let w = window(&values);
        let cp = fit_changepoint(&w, &fit_matern(&w).unwrap()).unwrap();
        let (lo, hi) = location_bounds(21);
        assert!(cp.fit.hypers.c >= lo && cp.fit.hypers.c <= hi);
    }
}
