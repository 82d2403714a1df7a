use chrono::NaiveDate;

use super::{DataError, PriceSeries, ReturnSeries, StandardizedWindow, VolSeries};

/// Trading days per year, used for every annualization.
pub const ANNUALIZATION: f64 = 252.0;

/// Effective observations required before an EWM volatility is usable.
pub const VOL_WARM_UP: usize = 10;

const DEGENERATE_STD: f64 = 1e-12;

pub fn arithmetic_returns(prices: &PriceSeries) -> Result<ReturnSeries, DataError> {
    if prices.len() < 2 {
        return Err(DataError::InsufficientData {
            symbol: prices.symbol.clone(),
            have: prices.len(),
            need: 2,
        });
    }
    let values = prices
        .closes
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0])
        .collect();
    Ok(ReturnSeries {
        symbol: prices.symbol.clone(),
        dates: prices.dates[1..].to_vec(),
        values,
    })
}

/// Exponentially weighted moving standard deviation of daily returns with
/// decay `2 / (span + 1)`, annualized by `sqrt(252)`.
///
/// The recursion is seeded with the first return (mean = r_0, variance = 0)
/// and only ever looks backwards, so the value at index `i` depends on
/// `returns[..=i]` alone.
pub fn ewm_volatility(returns: &ReturnSeries, span: usize) -> Result<VolSeries, DataError> {
    if returns.is_empty() {
        return Err(DataError::InsufficientData {
            symbol: returns.symbol.clone(),
            have: 0,
            need: 1,
        });
    }
    if span < 2 {
        return Err(DataError::Validation {
            symbol: returns.symbol.clone(),
            message: format!("ewm span must be >= 2, got {span}"),
        });
    }
    let alpha = 2.0 / (span as f64 + 1.0);
    let scale = ANNUALIZATION.sqrt();
    let mut values = Vec::with_capacity(returns.len());
    let mut mean = returns.values[0];
    let mut var = 0.0;
    values.push(0.0);
    for &r in &returns.values[1..] {
        let diff = r - mean;
        mean += alpha * diff;
        var = (1.0 - alpha) * (var + alpha * diff * diff);
        values.push(var.max(0.0).sqrt() * scale);
    }
    Ok(VolSeries {
        symbol: returns.symbol.clone(),
        dates: returns.dates.clone(),
        warm_up: (VOL_WARM_UP - 1).min(values.len()),
        values,
    })
}

/// Causal winsorization: each return is clamped to within `clip` EWM
/// standard deviations of the EWM mean of the *already clamped* history.
///
/// Statistics use half-life `halflife` and reliability-weighted (unbiased)
/// variance. Clamping starts once two prior observations with nonzero
/// dispersion exist. Because the statistics are built from clamped values,
/// applying the transform twice is the same as applying it once.
pub fn winsorize(returns: &ReturnSeries, halflife: f64, clip: f64) -> ReturnSeries {
    assert!(halflife > 0.0 && clip > 0.0, "halflife and clip must be > 0");
    let decay = 0.5f64.powf(1.0 / halflife);
    let mut weight = 0.0;
    let mut weight_sq = 0.0;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    let mut seen = 0usize;
    let values = returns
        .values
        .iter()
        .map(|&r| {
            let mut x = r;
            if seen >= 2 {
                let denom = weight - weight_sq / weight;
                let var: f64 = if denom > 0.0 { m2 / denom } else { 0.0 };
                let std = var.max(0.0).sqrt();
                if std > 0.0 {
                    x = x.clamp(mean - clip * std, mean + clip * std);
                }
            }
            weight = decay * weight + 1.0;
            weight_sq = decay * decay * weight_sq + 1.0;
            m2 *= decay;
            let delta = x - mean;
            mean += delta / weight;
            m2 += delta * (x - mean);
            seen += 1;
            x
        })
        .collect();
    ReturnSeries {
        symbol: returns.symbol.clone(),
        dates: returns.dates.clone(),
        values,
    }
}

/// Population-standardize a slice. Returns `None` when the standard
/// deviation is below 1e-12.
pub fn standardize_values(values: &[f64]) -> Option<Vec<f64>> {
    let n = values.len() as f64;
    if values.is_empty() {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std.is_nan() || std < DEGENERATE_STD {
        return None;
    }
    Some(values.iter().map(|v| (v - mean) / std).collect())
}

pub fn standardize_window(
    returns: &ReturnSeries,
    end_date: NaiveDate,
    lookback: usize,
) -> Result<StandardizedWindow, DataError> {
    let end = returns.index_of(end_date).ok_or(DataError::MissingDate {
        symbol: returns.symbol.clone(),
        date: end_date,
    })?;
    if end < lookback {
        return Err(DataError::InsufficientData {
            symbol: returns.symbol.clone(),
            have: end + 1,
            need: lookback + 1,
        });
    }
    let raw = &returns.values[end - lookback..=end];
    let values = standardize_values(raw).ok_or_else(|| {
        let n = raw.len() as f64;
        let mean = raw.iter().sum::<f64>() / n;
        let std = (raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        DataError::DegenerateWindow {
            symbol: returns.symbol.clone(),
            end: end_date,
            std,
        }
    })?;
    Ok(StandardizedWindow {
        symbol: returns.symbol.clone(),
        end_date,
        lookback,
        values,
    })
}
