//! Position moving averages and changepoint-delimited regimes for plotting.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub const LONG_AVERAGE: usize = 252;
pub const SHORT_AVERAGE: usize = 21;
pub const REGIME_BURN_IN: usize = 63;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionAverages {
    pub date: NaiveDate,
    pub position: f64,
    /// Trailing simple averages, `None` until enough history.
    pub long: Option<f64>,
    pub short: Option<f64>,
}

fn trailing_mean(x: &[f64], k: usize, window: usize) -> Option<f64> {
    (k + 1 >= window).then(|| x[k + 1 - window..=k].iter().sum::<f64>() / window as f64)
}

pub fn position_diagnostics(positions: &[(NaiveDate, f64)], long: usize, short: usize) -> Vec<PositionAverages> {
    let x: Vec<f64> = positions.iter().map(|(_, v)| *v).collect();
    positions
        .iter()
        .enumerate()
        .map(|(k, &(date, position))| PositionAverages {
            date,
            position,
            long: trailing_mean(&x, k, long),
            short: trailing_mean(&x, k, short),
        })
        .collect()
}

/// Dates on which a changepoint is declared: severity at or above
/// `threshold`, at least `burn_in` observations after the previous one.
pub fn regime_boundaries(severity: &[(NaiveDate, f64)], threshold: f64, burn_in: usize) -> Vec<NaiveDate> {
    let mut out = Vec::new();
    let mut last: Option<usize> = None;
    for (k, &(date, nu)) in severity.iter().enumerate() {
        if nu >= threshold && last.is_none_or(|l| k - l >= burn_in) {
            out.push(date);
            last = Some(k);
        }
    }
    out
}
