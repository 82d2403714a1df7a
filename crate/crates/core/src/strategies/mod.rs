//! Classical time-series momentum benchmarks and the volatility-scaling
//! framework shared by every strategy.

mod macd;

pub use macd::{halflife, macd_position, macd_response, macd_series, Indicator, MacdParams};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::data::AssetFrame;

pub const ANNUAL_LOOKBACK: usize = 252;
pub const MONTHLY_LOOKBACK: usize = 21;
pub const DEFAULT_SIGMA_TGT: f64 = 0.15;

/// Strategy selected by name:
/// `long_only | moskowitz | intermediate:w=<f> | macd | lstm | lstm_cpd[:lbw=<n>]`.
/// `lstm_cpd` without a lookback searches it jointly with the other
/// hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrategySpec {
    LongOnly,
    Moskowitz,
    Intermediate { w: f64 },
    Macd,
    Lstm,
    LstmCpd { lbw: Option<usize> },
}

impl StrategySpec {
    pub fn is_learned(&self) -> bool {
        matches!(self, Self::Lstm | Self::LstmCpd { .. })
    }

    pub fn uses_cpd(&self) -> bool {
        matches!(self, Self::LstmCpd { .. })
    }

    /// Report grouping.
    pub fn group(&self) -> &'static str {
        match self {
            Self::LongOnly | Self::Macd => "Reference",
            Self::Moskowitz | Self::Intermediate { .. } => "TSMOM",
            Self::Lstm => "LSTM",
            Self::LstmCpd { .. } => "LSTM w/ CPD",
        }
    }

    /// File-name friendly identifier.
    pub fn slug(&self) -> String {
        self.to_string().replace([':', '='], "_")
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::LongOnly => write!(f, "long_only"),
            Self::Moskowitz => write!(f, "moskowitz"),
            Self::Intermediate { w } => write!(f, "intermediate:w={w}"),
            Self::Macd => write!(f, "macd"),
            Self::Lstm => write!(f, "lstm"),
            Self::LstmCpd { lbw: Some(l) } => write!(f, "lstm_cpd:lbw={l}"),
            Self::LstmCpd { lbw: None } => write!(f, "lstm_cpd"),
        }
    }
}

impl FromStr for StrategySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let value = |key: &str| -> Result<&str, String> {
            let a = arg.ok_or_else(|| format!("`{s}`: missing `{key}=` argument"))?;
            a.strip_prefix(key)
                .and_then(|r| r.strip_prefix('='))
                .ok_or_else(|| format!("`{s}`: expected `{key}=<value>`"))
        };
        let spec = match name {
            "long_only" => Self::LongOnly,
            "moskowitz" => Self::Moskowitz,
            "macd" => Self::Macd,
            "lstm" => Self::Lstm,
            "intermediate" => {
                let w: f64 = value("w")?.parse().map_err(|e| format!("`{s}`: {e}"))?;
                if !(0.0..=1.0).contains(&w) {
                    return Err(format!("`{s}`: w must lie in [0, 1]"));
                }
                Self::Intermediate { w }
            }
            "lstm_cpd" if arg.is_none() => Self::LstmCpd { lbw: None },
            "lstm_cpd" => {
                let l: usize = value("lbw")?.parse().map_err(|e| format!("`{s}`: {e}"))?;
                if l == 0 {
                    return Err(format!("`{s}`: lbw must be positive"));
                }
                Self::LstmCpd { lbw: Some(l) }
            }
            _ => return Err(format!("unknown strategy `{s}`")),
        };
        if arg.is_some() && !matches!(spec, Self::Intermediate { .. } | Self::LstmCpd { .. }) {
            return Err(format!("`{s}` takes no argument"));
        }
        Ok(spec)
    }
}

/// `sgn` with `sgn(0) = 0`.
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn position_long_only() -> f64 {
    1.0
}

/// Sign of the trailing 252-day return; `None` without enough history.
pub fn position_moskowitz(frame: &AssetFrame, i: usize) -> Option<f64> {
    frame.trailing_return(i, ANNUAL_LOOKBACK).map(sign)
}

/// `(1 - w) sgn(r_{t-252,t}) + w sgn(r_{t-21,t})`.
pub fn position_intermediate(frame: &AssetFrame, i: usize, w: f64) -> Option<f64> {
    let slow = frame.trailing_return(i, ANNUAL_LOOKBACK)?;
    let fast = frame.trailing_return(i, MONTHLY_LOOKBACK)?;
    Some((1.0 - w) * sign(slow) + w * sign(fast))
}

/// MACD indicators for every frame index, one series per pair.
pub fn macd_indicators(frame: &AssetFrame, params: &MacdParams) -> Vec<Vec<Indicator>> {
    params
        .pairs
        .iter()
        .map(|&(s, l)| macd_series(&frame.closes, s, l, params)[1..].to_vec())
        .collect()
}

/// Positions of a classical strategy for every index of `frame`
/// (`None` where the asset is excluded). Panics on learned strategies.
pub fn classical_positions(spec: &StrategySpec, frame: &AssetFrame, macd: &MacdParams) -> Vec<Option<f64>> {
    let n = frame.len();
    match *spec {
        StrategySpec::LongOnly => vec![Some(position_long_only()); n],
        StrategySpec::Moskowitz => (0..n).map(|i| position_moskowitz(frame, i)).collect(),
        StrategySpec::Intermediate { w } => (0..n).map(|i| position_intermediate(frame, i, w)).collect(),
        StrategySpec::Macd => {
            let ind = macd_indicators(frame, macd);
            (0..n)
                .map(|i| {
                    let at: Vec<Indicator> = ind.iter().map(|s| s[i]).collect();
                    macd_position(&at, macd.response_scale)
                })
                .collect()
        }
        StrategySpec::Lstm | StrategySpec::LstmCpd { .. } => {
            panic!("{spec} positions come from a trained model")
        }
    }
}

/// `R_{t+1} = X_t (sigma_tgt / sigma_t) r_{t+1}`; `None` unless `sigma_t > 0`.
pub fn captured_return(position: f64, sigma: f64, next_return: f64, sigma_tgt: f64) -> Option<f64> {
    (sigma > 0.0).then(|| position * sigma_tgt / sigma * next_return)
}

/// Equal-weight mean over the assets present; `None` for an empty day.
pub fn portfolio_return(asset_returns: &[f64]) -> Option<f64> {
    (!asset_returns.is_empty()).then(|| asset_returns.iter().sum::<f64>() / asset_returns.len() as f64)
}

/// One asset's captured return on `date` from the position held since the
/// previous day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssetDay {
    pub date: NaiveDate,
    pub position: f64,
    pub sigma: f64,
    pub captured: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StrategyReturns {
    pub per_asset: BTreeMap<String, Vec<AssetDay>>,
    pub portfolio: Vec<(NaiveDate, f64)>,
}

impl StrategyReturns {
    pub fn from_assets(per_asset: BTreeMap<String, Vec<AssetDay>>) -> Self {
        let portfolio = aggregate(&per_asset, |d| d.captured);
        Self { per_asset, portfolio }
    }

    pub fn portfolio_values(&self) -> Vec<f64> {
        self.portfolio.iter().map(|(_, r)| *r).collect()
    }
}

/// Equal-weight portfolio of a per-asset quantity, one value per date with
/// at least one asset.
pub fn aggregate(
    per_asset: &BTreeMap<String, Vec<AssetDay>>,
    value: impl Fn(&AssetDay) -> f64,
) -> Vec<(NaiveDate, f64)> {
    let mut by_date: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
    for days in per_asset.values() {
        for d in days {
            by_date.entry(d.date).or_default().push(value(d));
        }
    }
    by_date
        .into_iter()
        .filter_map(|(d, v)| portfolio_return(&v).map(|r| (d, r)))
        .collect()
}

/// Captured returns of `positions` on `frame`, keeping days whose return
/// date lies in `[start, end)`. Position `i` earns the return at `i + 1`.
pub fn capture(
    frame: &AssetFrame,
    positions: &[Option<f64>],
    sigma_tgt: f64,
    start: NaiveDate,
    end: NaiveDate,
) -> Vec<AssetDay> {
    let range = frame.range(start, end);
    range
        .filter(|&j| j >= 1)
        .filter_map(|j| {
            let i = j - 1;
            let x = positions.get(i).copied().flatten()?;
            let date = frame.dates[j];
            let Some(sigma) = frame.sigma(i) else {
                // a zero risk estimate after warm-up cannot be sized: flat book
                let flat = i >= frame.vol_warm_up && frame.vols[i] == 0.0;
                return flat.then_some(AssetDay { date, position: 0.0, sigma: 0.0, captured: 0.0 });
            };
            let captured = captured_return(x, sigma, frame.returns[j], sigma_tgt)?;
            Some(AssetDay { date, position: x, sigma, captured })
        })
        .collect()
}
