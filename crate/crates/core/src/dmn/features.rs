//! Model inputs: volatility-normalized multi-horizon returns, MACD
//! indicators and optional changepoint severity/location.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::DmnError;
use crate::data::{AssetFrame, ANNUALIZATION};
use crate::gp::CpdLookup;
use crate::strategies::{macd_indicators, MacdParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Return horizons in days.
    pub offsets: Vec<usize>,
    pub macd: MacdParams,
    /// Lookback of the changepoint inputs, if any.
    pub cpd_lookback: Option<usize>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            offsets: vec![1, 21, 63, 126, 252],
            macd: MacdParams::default(),
            cpd_lookback: None,
        }
    }
}

impl FeatureConfig {
    pub fn with_cpd(&self, lookback: Option<usize>) -> Self {
        Self { cpd_lookback: lookback, ..self.clone() }
    }

    pub fn width(&self) -> usize {
        self.offsets.len() + self.macd.pairs.len() + if self.cpd_lookback.is_some() { 2 } else { 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub date: NaiveDate,
    /// `r_{t-t',t} / (sigma_t sqrt(t'))` per offset, with daily sigma.
    pub norm_returns: Vec<f64>,
    pub macd: Vec<f64>,
    pub cpd: Option<(f64, f64)>,
}

impl FeatureRow {
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        let cpd = self.cpd.into_iter().flat_map(|(nu, gamma)| [nu, gamma]);
        self.norm_returns.iter().chain(&self.macd).copied().chain(cpd)
    }
}

/// Feature rows of one asset with their frame indices and training targets.
#[derive(Debug, Clone, PartialEq)]
pub struct AssetFeatures {
    pub symbol: String,
    pub rows: Vec<FeatureRow>,
    /// Frame index of each row.
    pub index: Vec<usize>,
    /// `sigma_tgt / sigma_t * r_{t+1}`, `None` for the last observation.
    pub targets: Vec<Option<f64>>,
    /// Date of the return each target refers to.
    pub target_dates: Vec<Option<NaiveDate>>,
}

impl AssetFeatures {
    pub fn row_of_frame_index(&self, i: usize) -> Option<usize> {
        self.index.binary_search(&i).ok()
    }
}

/// Build one feature row per frame index with full history. `frame` is
/// expected to be the winsorized frame. When `cfg.cpd_lookback` is set
/// every row must have a cache entry.
pub fn build_features(
    frame: &AssetFrame,
    cfg: &FeatureConfig,
    cpd: Option<&CpdLookup>,
    sigma_tgt: f64,
) -> Result<AssetFeatures, DmnError> {
    let macd = macd_indicators(frame, &cfg.macd);
    let daily = ANNUALIZATION.sqrt();
    let mut out = AssetFeatures {
        symbol: frame.symbol.clone(),
        rows: Vec::new(),
        index: Vec::new(),
        targets: Vec::new(),
        target_dates: Vec::new(),
    };
    for i in 0..frame.len() {
        let Some(sigma) = frame.sigma(i) else { continue };
        let sigma_daily = sigma / daily;
        let norm: Option<Vec<f64>> = cfg
            .offsets
            .iter()
            .map(|&k| frame.trailing_return(i, k).map(|r| r / (sigma_daily * (k as f64).sqrt())))
            .collect();
        let Some(norm_returns) = norm else { continue };
        if macd.iter().any(|s| !s[i].ready) {
            continue;
        }
        let date = frame.dates[i];
        let cpd_values = match cfg.cpd_lookback {
            None => None,
            Some(l) => {
                let lookup = cpd.ok_or(DmnError::MissingCpd {
                    symbol: frame.symbol.clone(),
                    date,
                    lookback: l,
                })?;
                Some(lookup.get(&frame.symbol, l, date).ok_or(DmnError::MissingCpd {
                    symbol: frame.symbol.clone(),
                    date,
                    lookback: l,
                })?)
            }
        };
        out.rows.push(FeatureRow {
            date,
            norm_returns,
            macd: macd.iter().map(|s| s[i].value).collect(),
            cpd: cpd_values,
        });
        out.index.push(i);
        let next = (i + 1 < frame.len()).then(|| sigma_tgt / sigma * frame.returns[i + 1]);
        out.targets.push(next);
        out.target_dates.push((i + 1 < frame.len()).then(|| frame.dates[i + 1]));
    }
    Ok(out)
}
