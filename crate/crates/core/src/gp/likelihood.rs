use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::GpError;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Diagonal jitter schedule tried after a plain factorization fails.
pub const JITTER_START: f64 = 1e-8;
pub const JITTER_MAX: f64 = 1e-4;

/// Negative log marginal likelihood of `y ~ N(0, V)`:
/// `0.5 y' V^-1 y + 0.5 ln|V| + n/2 ln 2pi`, via Cholesky.
pub fn nlml(y: &[f64], v: &DMatrix<f64>) -> Result<f64, GpError> {
    let chol = Cholesky::new(v.clone()).ok_or(GpError::NotPositiveDefinite)?;
    Ok(nlml_from_cholesky(y, &chol))
}

fn nlml_from_cholesky(y: &[f64], chol: &Cholesky<f64, Dyn>) -> f64 {
    let yv = DVector::from_column_slice(y);
    let alpha = chol.solve(&yv);
    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
    0.5 * yv.dot(&alpha) + 0.5 * log_det + 0.5 * y.len() as f64 * LN_2PI
}

/// Factorize `V`, adding escalating diagonal jitter (1e-8 up to 1e-4, x10
/// per step) if the plain factorization fails.
pub fn factorize_with_jitter(v: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64), GpError> {
    if let Some(c) = Cholesky::new(v.clone()) {
        return Ok((c, 0.0));
    }
    let mut jitter = JITTER_START;
    while jitter <= JITTER_MAX * (1.0 + 1e-12) {
        let mut vj = v.clone();
        for i in 0..vj.nrows() {
            vj[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(vj) {
            return Ok((c, jitter));
        }
        jitter *= 10.0;
    }
    Err(GpError::NotPositiveDefinite)
}

/// NLML and its gradient given `dV/dtheta_j` for every parameter, using
/// `d nlml / d theta_j = 0.5 tr((V^-1 - a a') dV_j)` with `a = V^-1 y`.
pub fn nlml_with_grad(
    y: &[f64],
    v: &DMatrix<f64>,
    dv: &[DMatrix<f64>],
) -> Result<(f64, Vec<f64>), GpError> {
    let (chol, _) = factorize_with_jitter(v)?;
    let value = nlml_from_cholesky(y, &chol);
    if !value.is_finite() {
        return Err(GpError::NonFinite);
    }
    let alpha = chol.solve(&DVector::from_column_slice(y));
    let mut w = chol.inverse();
    w.ger(-1.0, &alpha, &alpha, 1.0);
    let grad = dv.iter().map(|d| 0.5 * w.component_mul(d).sum()).collect();
    Ok((value, grad))
}
