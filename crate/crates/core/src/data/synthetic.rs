use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{DataError, PriceSeries};

/// Lowest daily return the generator will emit; keeps prices positive.
const MIN_RETURN: f64 = -0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSegment {
    /// Trading days in the segment.
    pub length: usize,
    /// Daily mean return.
    pub drift: f64,
    /// Daily return standard deviation.
    pub vol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub segments: Vec<RegimeSegment>,
    pub seed: u64,
    #[serde(default = "default_start_price")]
    pub start_price: f64,
}

fn default_start_price() -> f64 {
    100.0
}

impl RegimeSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.segments.is_empty() {
            return Err(DataError::InvalidSpec("no segments".into()));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if s.length == 0 {
                return Err(DataError::InvalidSpec(format!("segment {i}: zero length")));
            }
            if !(s.vol.is_finite() && s.vol >= 0.0) || !s.drift.is_finite() {
                return Err(DataError::InvalidSpec(format!(
                    "segment {i}: drift {} / vol {} invalid",
                    s.drift, s.vol
                )));
            }
        }
        if !(self.start_price.is_finite() && self.start_price > 0.0) {
            return Err(DataError::InvalidSpec(format!("start price {}", self.start_price)));
        }
        Ok(())
    }

    pub fn total_days(&self) -> usize {
        self.segments.iter().map(|s| s.length).sum()
    }
}

fn next_business_day(d: NaiveDate) -> NaiveDate {
    let mut d = d + Days::new(1);
    while matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
        d = d + Days::new(1);
    }
    d
}

fn first_business_day(d: NaiveDate) -> NaiveDate {
    if matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
        next_business_day(d)
    } else {
        d
    }
}

/// Business-day price path built multiplicatively from Gaussian daily
/// returns, one draw per day, segment by segment. The first price is
/// `start_price` on the first business day at or after `start`; the path
/// has `total_days() + 1` observations.
pub fn generate_synthetic(
    symbol: &str,
    start: NaiveDate,
    spec: &RegimeSpec,
) -> Result<PriceSeries, DataError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.total_days() + 1;
    let mut dates = Vec::with_capacity(n);
    let mut closes = Vec::with_capacity(n);
    let mut date = first_business_day(start);
    let mut price = spec.start_price;
    dates.push(date);
    closes.push(price);
    for seg in &spec.segments {
        for _ in 0..seg.length {
            let z: f64 = rng.sample(StandardNormal);
            let r = (seg.drift + seg.vol * z).max(MIN_RETURN);
            price *= 1.0 + r;
            date = next_business_day(date);
            dates.push(date);
            closes.push(price);
        }
    }
    PriceSeries::new(symbol, dates, closes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetSpec {
    pub symbol: String,
    #[serde(flatten)]
    pub regimes: RegimeSpec,
}

/// A multi-asset synthetic universe, the on-disk format read by `gen-data`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniverseSpec {
    pub start_date: NaiveDate,
    pub assets: Vec<AssetSpec>,
}

impl UniverseSpec {
    pub fn from_toml(text: &str) -> Result<Self, DataError> {
        let spec: Self = toml::from_str(text).map_err(|e| DataError::InvalidSpec(e.to_string()))?;
        if spec.assets.is_empty() {
            return Err(DataError::InvalidSpec("no assets".into()));
        }
        for a in &spec.assets {
            a.regimes
                .validate()
                .map_err(|e| DataError::InvalidSpec(format!("{}: {e}", a.symbol)))?;
        }
        Ok(spec)
    }

    pub fn generate(&self) -> Result<Vec<PriceSeries>, DataError> {
        self.assets
            .iter()
            .map(|a| generate_synthetic(&a.symbol, self.start_date, &a.regimes))
            .collect()
    }
}

/// Universe of `n_assets` with consecutive regimes of `regime_len` days whose
/// drift sign is a fair coin flip per regime (magnitude `drift`), daily
/// volatility `vol` scaled per regime by a factor drawn from `[0.5, 1.5]`
/// when `vary_vol` is set.
#[allow(clippy::too_many_arguments)]
pub fn regime_universe(
    n_assets: usize,
    total_days: usize,
    regime_len: usize,
    drift: f64,
    vol: f64,
    vary_vol: bool,
    start_date: NaiveDate,
    seed: u64,
) -> UniverseSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let assets = (0..n_assets)
        .map(|i| {
            let mut segments = Vec::new();
            let mut left = total_days;
            while left > 0 {
                let length = regime_len.min(left);
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let scale = if vary_vol { rng.random_range(0.5..1.5) } else { 1.0 };
                segments.push(RegimeSegment {
                    length,
                    drift: sign * drift,
                    vol: vol * scale,
                });
                left -= length;
            }
            AssetSpec {
                symbol: format!("S{i:02}"),
                regimes: RegimeSpec {
                    segments,
                    seed: rng.random(),
                    start_price: 100.0,
                },
            }
        })
        .collect();
    UniverseSpec { start_date, assets }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn start() -> NaiveDate {
        NaiveDate::from_ymd_opt(2010, 1, 1).unwrap()
    }

    fn pop_std(x: &[f64]) -> f64 {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn flat_segment_gives_constant_price() {
        let spec = RegimeSpec {
            segments: vec![RegimeSegment { length: 100, drift: 0.0, vol: 0.0 }],
            seed: 1,
            start_price: 100.0,
        };
        let p = generate_synthetic("A", start(), &spec).unwrap();
        assert_eq!(p.len(), 101);
        assert!(p.closes.iter().all(|&c| c == 100.0));
        assert!(p.dates.iter().all(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun)));
    }

    #[test]
    fn second_regime_is_more_volatile() {
        let spec = RegimeSpec {
            segments: vec![
                RegimeSegment { length: 50, drift: 0.0, vol: 0.001 },
                RegimeSegment { length: 50, drift: 0.0, vol: 0.02 },
            ],
            seed: 7,
            start_price: 100.0,
        };
        let p = generate_synthetic("A", start(), &spec).unwrap();
        let r: Vec<f64> = p.closes.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
        assert!(pop_std(&r[50..]) > 5.0 * pop_std(&r[..50]));
    }

    #[test]
    fn deterministic_given_seed() {
        let u = regime_universe(3, 300, 50, 0.001, 0.01, true, start(), 9);
        assert_eq!(u.generate().unwrap(), u.generate().unwrap());
        let v = regime_universe(3, 300, 50, 0.001, 0.01, true, start(), 10);
        assert_ne!(u.generate().unwrap(), v.generate().unwrap());
    }

    #[test]
    fn invalid_specs_rejected() {
        let bad = RegimeSpec { segments: vec![], seed: 0, start_price: 100.0 };
        assert!(generate_synthetic("A", start(), &bad).is_err());
        let bad = RegimeSpec {
            segments: vec![RegimeSegment { length: 0, drift: 0.0, vol: 0.1 }],
            seed: 0,
            start_price: 100.0,
        };
        assert!(generate_synthetic("A", start(), &bad).is_err());
    }

    #[test]
    fn universe_toml() {
        let text = r#"
start_date = "2012-01-02"

[[assets]]
symbol = "A"
seed = 3
segments = [{ length = 10, drift = 0.0, vol = 0.01 }, { length = 5, drift = 0.001, vol = 0.02 }]

[[assets]]
symbol = "B"
seed = 4
start_price = 50.0
segments = [{ length = 12, drift = 0.0, vol = 0.01 }]
"#;
        let u = UniverseSpec::from_toml(text).unwrap();
        let series = u.generate().unwrap();
        assert_eq!(series[0].len(), 16);
        assert_eq!(series[1].closes[0], 50.0);
        assert!(UniverseSpec::from_toml("start_date = \"2012-01-02\"\nassets = []").is_err());
    }
}
