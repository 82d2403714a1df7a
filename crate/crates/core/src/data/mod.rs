//! Dated price and return series, plus the transforms every other stage
//! consumes: arithmetic returns, ex-ante volatility, winsorization, window
//! standardization and synthetic regime data.

mod frame;
mod io;
mod synthetic;
mod transform;

pub use frame::AssetFrame;
pub use io::{load_prices, read_prices, write_prices};
pub use synthetic::{generate_synthetic, regime_universe, RegimeSegment, RegimeSpec, UniverseSpec};
pub use transform::{
    arithmetic_returns, ewm_volatility, standardize_values, standardize_window, winsorize,
    ANNUALIZATION, VOL_WARM_UP,
};

use chrono::NaiveDate;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{symbol}: {message}")]
    Validation { symbol: String, message: String },
    #[error("{symbol}: insufficient data ({have} observations, need {need})")]
    InsufficientData {
        symbol: String,
        have: usize,
        need: usize,
    },
    #[error("{symbol}: degenerate window ending {end} (std {std:e})")]
    DegenerateWindow {
        symbol: String,
        end: NaiveDate,
        std: f64,
    },
    #[error("{symbol}: no observation dated {date}")]
    MissingDate { symbol: String, date: NaiveDate },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Close prices for one asset, strictly increasing in date.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub symbol: String,
    pub dates: Vec<NaiveDate>,
    pub closes: Vec<f64>,
}

impl PriceSeries {
    pub fn new(
        symbol: impl Into<String>,
        dates: Vec<NaiveDate>,
        closes: Vec<f64>,
    ) -> Result<Self, DataError> {
        let symbol = symbol.into();
        let fail = |message: String| DataError::Validation {
            symbol: symbol.clone(),
            message,
        };
        if dates.len() != closes.len() {
            return Err(fail(format!(
                "{} dates but {} closes",
                dates.len(),
                closes.len()
            )));
        }
        for w in dates.windows(2) {
            if w[1] == w[0] {
                return Err(fail(format!("duplicate date {}", w[0])));
            }
            if w[1] < w[0] {
                return Err(fail(format!("dates out of order at {}", w[1])));
            }
        }
        if let Some((d, p)) = dates
            .iter()
            .zip(&closes)
            .find(|(_, p)| !(p.is_finite() && **p > 0.0))
        {
            return Err(fail(format!("non-positive or non-finite close {p} on {d}")));
        }
        Ok(Self {
            symbol,
            dates,
            closes,
        })
    }

    pub fn len(&self) -> usize {
        self.closes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closes.is_empty()
    }
}

/// Daily arithmetic returns, dated by the later of the two prices.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub symbol: String,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl ReturnSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }
}

/// Annualized ex-ante volatility aligned one-to-one with a [`ReturnSeries`].
///
/// The first `warm_up` values are computed from fewer than
/// [`VOL_WARM_UP`] observations and must not be used for sizing.
#[derive(Debug, Clone, PartialEq)]
pub struct VolSeries {
    pub symbol: String,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
    pub warm_up: usize,
}

impl VolSeries {
    pub fn is_warm(&self, idx: usize) -> bool {
        idx >= self.warm_up
    }
}

/// Standardized trailing window of `lookback + 1` returns ending at `end_date`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedWindow {
    pub symbol: String,
    pub end_date: NaiveDate,
    pub lookback: usize,
    pub values: Vec<f64>,
}

impl StandardizedWindow {
    /// Window-local time offsets `0..=lookback`, i.e. `T-l ..= T` shifted to zero.
    pub fn time_index(&self) -> Vec<f64> {
        (0..=self.lookback).map(|i| i as f64).collect()
    }
}
