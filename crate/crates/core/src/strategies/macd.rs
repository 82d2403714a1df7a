//! Volatility-normalized MACD indicators and the MACD benchmark position.

use serde::{Deserialize, Serialize};

/// Indicator value with a readiness flag; `value` is 0 whenever not ready.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Indicator {
    pub value: f64,
    pub ready: bool,
}

impl Indicator {
    const WARM: Self = Self { value: 0.0, ready: false };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacdParams {
    /// (short, long) timescales in days.
    pub pairs: Vec<(usize, usize)>,
    /// Rolling window for the price standard deviation.
    pub price_std_window: usize,
    /// Rolling window for the standard deviation of the raw signal.
    pub signal_std_window: usize,
    /// Normalizer of the response function.
    pub response_scale: f64,
}

impl Default for MacdParams {
    fn default() -> Self {
        Self {
            pairs: vec![(8, 24), (16, 28), (32, 96)],
            price_std_window: 63,
            signal_std_window: 252,
            response_scale: 0.89,
        }
    }
}

impl MacdParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.pairs.is_empty() {
            return Err("no MACD pairs".into());
        }
        for &(s, l) in &self.pairs {
            if s == 0 || s >= l {
                return Err(format!("MACD pair ({s},{l}) needs 0 < S < L"));
            }
        }
        if self.price_std_window < 2 || self.signal_std_window < 2 {
            return Err("MACD std windows must be >= 2".into());
        }
        Ok(())
    }
}

/// EWMA half-life for timescale `s`: `ln 0.5 / ln(1 - 1/s)`.
pub fn halflife(timescale: usize) -> f64 {
    0.5f64.ln() / (1.0 - 1.0 / timescale as f64).ln()
}

fn ewma(values: &[f64], halflife: f64) -> Vec<f64> {
    let alpha = 1.0 - (0.5f64.ln() / halflife).exp();
    let mut out = Vec::with_capacity(values.len());
    let mut m = match values.first() {
        Some(&v) => v,
        None => return out,
    };
    for &v in values {
        m = (1.0 - alpha) * m + alpha * v;
        out.push(m);
    }
    out
}

/// Sample (n-1) standard deviation of each trailing window of length `w`;
/// `None` before the first full window or where an input is `None`.
fn rolling_std(values: &[Option<f64>], w: usize) -> Vec<Option<f64>> {
    (0..values.len())
        .map(|t| {
            if t + 1 < w {
                return None;
            }
            let win: Option<Vec<f64>> = values[t + 1 - w..=t].iter().copied().collect();
            let win = win?;
            let mean = win.iter().sum::<f64>() / w as f64;
            let var = win.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (w as f64 - 1.0);
            Some(var.sqrt())
        })
        .collect()
}

/// Normalized MACD for every index of `closes`, causally:
/// `q = (EWMA_S - EWMA_L) / std_63(price)`, `y = q / std_252(q)`.
pub fn macd_series(closes: &[f64], short: usize, long: usize, params: &MacdParams) -> Vec<Indicator> {
    let fast = ewma(closes, halflife(short));
    let slow = ewma(closes, halflife(long));
    let price_std = rolling_std(&closes.iter().map(|&c| Some(c)).collect::<Vec<_>>(), params.price_std_window);
    let q: Vec<Option<f64>> = (0..closes.len())
        .map(|t| match price_std[t] {
            Some(sd) if sd > 0.0 => Some((fast[t] - slow[t]) / sd),
            _ => None,
        })
        .collect();
    let q_std = rolling_std(&q, params.signal_std_window);
    (0..closes.len())
        .map(|t| match (q[t], q_std[t]) {
            (Some(v), Some(sd)) if sd > 0.0 => Indicator { value: v / sd, ready: true },
            _ => Indicator::WARM,
        })
        .collect()
}

/// `phi(y) = y exp(-y^2 / 4) / 0.89`.
pub fn macd_response(y: f64, scale: f64) -> f64 {
    y * (-y * y / 4.0).exp() / scale
}

/// Mean response over all pairs at one index; `None` unless every pair is ready.
pub fn macd_position(indicators: &[Indicator], scale: f64) -> Option<f64> {
    if indicators.is_empty() || indicators.iter().any(|i| !i.ready) {
        return None;
    }
    Some(indicators.iter().map(|i| macd_response(i.value, scale)).sum::<f64>() / indicators.len() as f64)
}
