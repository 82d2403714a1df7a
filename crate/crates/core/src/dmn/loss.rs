//! Negative annualized Sharpe ratio of captured returns.

use super::DmnError;
use crate::data::ANNUALIZATION;

/// Below this standard deviation the Sharpe ratio is undefined.
pub const MIN_STD: f64 = 1e-12;

/// `-sqrt(252) * mean(R) / std(R)` with `R = X * y` and population std.
pub fn sharpe_loss(positions: &[f64], targets: &[f64]) -> Result<f64, DmnError> {
    sharpe_loss_grad(positions, targets).map(|(l, _)| l)
}

/// Loss and its gradient w.r.t. each position.
pub fn sharpe_loss_grad(positions: &[f64], targets: &[f64]) -> Result<(f64, Vec<f64>), DmnError> {
    assert_eq!(positions.len(), targets.len());
    let n = positions.len();
    if n == 0 {
        return Err(DmnError::DegenerateLoss { std: 0.0 });
    }
    let nf = n as f64;
    let r: Vec<f64> = positions.iter().zip(targets).map(|(x, y)| x * y).collect();
    let mean = r.iter().sum::<f64>() / nf;
    let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
    let std = var.sqrt();
    if !std.is_finite() || std < MIN_STD {
        return Err(DmnError::DegenerateLoss { std });
    }
    let k = ANNUALIZATION.sqrt();
    let loss = -k * mean / std;
    // d mean / dR_i = 1/n, d std / dR_i = (R_i - mean) / (n std)
    let grad = r
        .iter()
        .zip(targets)
        .map(|(ri, y)| {
            let dr = -k * (1.0 / (nf * std) - mean * (ri - mean) / (nf * std.powi(3)));
            dr * y
        })
        .collect();
    Ok((loss, grad))
}
