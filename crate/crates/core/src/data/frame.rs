use chrono::NaiveDate;

use super::{arithmetic_returns, ewm_volatility, winsorize, DataError, PriceSeries, ReturnSeries};

/// Per-asset panel indexed by return date: index `i` holds the close on
/// `dates[i]`, the return into `dates[i]`, and the ex-ante volatility
/// estimated through `dates[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssetFrame {
    pub symbol: String,
    pub dates: Vec<NaiveDate>,
    /// Closes including the first (return-less) observation: `closes[i + 1]`
    /// is the close on `dates[i]`.
    pub closes: Vec<f64>,
    pub returns: Vec<f64>,
    /// Annualized ex-ante volatility.
    pub vols: Vec<f64>,
    pub vol_warm_up: usize,
}

impl AssetFrame {
    pub fn from_prices(prices: &PriceSeries, vol_span: usize) -> Result<Self, DataError> {
        let returns = arithmetic_returns(prices)?;
        let vols = ewm_volatility(&returns, vol_span)?;
        Ok(Self {
            symbol: prices.symbol.clone(),
            dates: returns.dates,
            closes: prices.closes.clone(),
            returns: returns.values,
            vols: vols.values,
            vol_warm_up: vols.warm_up,
        })
    }

    /// Frame rebuilt from winsorized returns: closes are reconstructed from
    /// the first close and volatility is re-estimated.
    pub fn winsorized(&self, halflife: f64, clip: f64, vol_span: usize) -> Self {
        let clipped = winsorize(&self.return_series(), halflife, clip);
        let mut closes = Vec::with_capacity(self.closes.len());
        let mut level = self.closes[0];
        closes.push(level);
        for r in &clipped.values {
            level *= 1.0 + r;
            closes.push(level);
        }
        let vols = ewm_volatility(&clipped, vol_span).expect("non-empty returns");
        Self {
            symbol: self.symbol.clone(),
            dates: self.dates.clone(),
            closes,
            returns: clipped.values,
            vols: vols.values,
            vol_warm_up: vols.warm_up,
        }
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn close(&self, i: usize) -> f64 {
        self.closes[i + 1]
    }

    /// Closes up to and including index `i`, oldest first.
    pub fn closes_through(&self, i: usize) -> &[f64] {
        &self.closes[..=i + 1]
    }

    /// Cumulative arithmetic return `p_i / p_{i-k} - 1`.
    pub fn trailing_return(&self, i: usize, k: usize) -> Option<f64> {
        if i + 1 < k || i >= self.len() {
            return None;
        }
        Some(self.closes[i + 1] / self.closes[i + 1 - k] - 1.0)
    }

    /// Usable ex-ante volatility at `i`: past warm-up and strictly positive.
    pub fn sigma(&self, i: usize) -> Option<f64> {
        let s = *self.vols.get(i)?;
        (i >= self.vol_warm_up && s > 0.0).then_some(s)
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    /// Index range of dates in `[start, end)`.
    pub fn range(&self, start: NaiveDate, end: NaiveDate) -> std::ops::Range<usize> {
        let lo = self.dates.partition_point(|d| *d < start);
        let hi = self.dates.partition_point(|d| *d < end);
        lo..hi.max(lo)
    }

    pub fn return_series(&self) -> ReturnSeries {
        ReturnSeries {
            symbol: self.symbol.clone(),
            dates: self.dates.clone(),
            values: self.returns.clone(),
        }
    }
}
