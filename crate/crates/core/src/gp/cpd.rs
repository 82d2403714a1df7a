use std::collections::BTreeMap;

use chrono::NaiveDate;
use log::debug;
use serde::{Deserialize, Serialize};

use super::fit::{fit_changepoint, fit_matern};
use crate::data::{standardize_values, ReturnSeries, StandardizedWindow};

/// Lookbacks of two weeks, a month, a quarter, half a year and a year.
pub const DEFAULT_LOOKBACKS: [usize; 5] = [10, 21, 63, 126, 252];

/// Keeps the score strictly inside (0, 1) in floating point.
const SCORE_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    None,
    Reinit,
    CarriedForward,
}

impl Fallback {
    pub fn as_str(self) -> &'static str {
        match self {
            Fallback::None => "none",
            Fallback::Reinit => "reinit",
            Fallback::CarriedForward => "carried_forward",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(Fallback::None),
            "reinit" => Some(Fallback::Reinit),
            "carried_forward" => Some(Fallback::CarriedForward),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpdResult {
    pub symbol: String,
    pub date: NaiveDate,
    pub lookback: usize,
    /// Changepoint severity in (0, 1).
    pub nu: f64,
    /// Changepoint location normalized to [0, 1] within the window.
    pub gamma: f64,
    /// NaN when the row was carried forward.
    pub nlml_matern: f64,
    pub nlml_changepoint: f64,
    pub fallback: Fallback,
}

/// Severity `nu = 1 - 1 / (1 + exp(-(nlml_c - nlml_m)))` and location
/// `gamma = (c - (t - l)) / l`, with `c_offset = c - (t - l)` in window
/// offsets.
pub fn cpd_score_location(nlml_matern: f64, nlml_changepoint: f64, c_offset: f64, lookback: usize) -> (f64, f64) {
    let delta = nlml_changepoint - nlml_matern;
    // 1 - 1/(1+e^{-delta}) = 1/(1+e^{delta})
    let nu = if delta >= 0.0 {
        let e = (-delta).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + delta.exp())
    };
    let nu = nu.clamp(SCORE_FLOOR, 1.0 - SCORE_FLOOR);
    let gamma = (c_offset / lookback as f64).clamp(0.0, 1.0);
    (nu, gamma)
}

fn carried(prev: Option<&CpdResult>, symbol: &str, date: NaiveDate, lookback: usize) -> CpdResult {
    let (nu, gamma) = match prev {
        // the old changepoint is one day deeper into the window
        Some(p) => (p.nu, (p.gamma - 1.0 / lookback as f64).max(0.0)),
        None => (0.5, 0.5),
    };
    CpdResult {
        symbol: symbol.to_string(),
        date,
        lookback,
        nu,
        gamma,
        nlml_matern: f64::NAN,
        nlml_changepoint: f64::NAN,
        fallback: Fallback::CarriedForward,
    }
}

fn score_window(window: &StandardizedWindow) -> Option<(f64, f64, f64, f64, Fallback)> {
    let matern = fit_matern(window).ok()?;
    let cp = fit_changepoint(window, &matern).ok()?;
    if !(matern.nlml.is_finite() && cp.fit.nlml.is_finite()) {
        return None;
    }
    let (nu, gamma) = cpd_score_location(matern.nlml, cp.fit.nlml, cp.fit.hypers.c, window.lookback);
    let fallback = if cp.reinitialized { Fallback::Reinit } else { Fallback::None };
    Some((nu, gamma, matern.nlml, cp.fit.nlml, fallback))
}

/// One result per return date in `range` (inclusive, all dates if `None`)
/// that has `lookback + 1` returns of history.
pub fn run_cpd(
    returns: &ReturnSeries,
    lookback: usize,
    range: Option<(NaiveDate, NaiveDate)>,
) -> Vec<CpdResult> {
    run_cpd_resume(returns, lookback, range, &BTreeMap::new())
}

/// Like [`run_cpd`], but dates already in `existing` are skipped (and
/// serve as the previous result for carry-forward). Only new rows are
/// returned.
pub fn run_cpd_resume(
    returns: &ReturnSeries,
    lookback: usize,
    range: Option<(NaiveDate, NaiveDate)>,
    existing: &BTreeMap<NaiveDate, CpdResult>,
) -> Vec<CpdResult> {
    assert!(lookback >= 1, "lookback must be positive");
    let mut out = Vec::new();
    let mut prev: Option<CpdResult> = None;
    for end in lookback..returns.len() {
        let date = returns.dates[end];
        if let Some((lo, hi)) = range {
            if date < lo || date > hi {
                continue;
            }
        }
        if let Some(row) = existing.get(&date) {
            prev = Some(row.clone());
            continue;
        }
        let raw = &returns.values[end - lookback..=end];
        let scored = standardize_values(raw).and_then(|values| {
            score_window(&StandardizedWindow {
                symbol: returns.symbol.clone(),
                end_date: date,
                lookback,
                values,
            })
        });
        let row = match scored {
            Some((nu, gamma, nlml_matern, nlml_changepoint, fallback)) => CpdResult {
                symbol: returns.symbol.clone(),
                date,
                lookback,
                nu,
                gamma,
                nlml_matern,
                nlml_changepoint,
                fallback,
            },
            None => {
                debug!("{} {date} l={lookback}: carrying forward", returns.symbol);
                carried(prev.as_ref(), &returns.symbol, date, lookback)
            }
        };
        prev = Some(row.clone());
        out.push(row);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn score_examples() {
        assert_eq!(cpd_score_location(10.0, 10.0, 5.0, 10).0, 0.5);
        let (nu, _) = cpd_score_location(88.0, 47.9, 5.0, 10);
        assert_abs_diff_eq!(nu, 1.0 - 1.0 / (1.0 + 40.1f64.exp()), epsilon = 1e-6);
        let (nu, _) = cpd_score_location(10.0, 12.0, 5.0, 10);
        assert_abs_diff_eq!(nu, 1.0 - 1.0 / (1.0 + (-2.0f64).exp()), epsilon = 1e-15);
        assert!((nu - 0.1192).abs() < 1e-4);
        assert_eq!(cpd_score_location(1.0, 2.0, 10.5, 21).1, 0.5);
    }

    proptest! {
        #[test]
        fn score_is_monotone_and_bounded(a in -30.0f64..30.0, b in -30.0f64..30.0, c in 0.0f64..21.0) {
            let (nu_a, g) = cpd_score_location(0.0, a, c, 21);
            let (nu_b, _) = cpd_score_location(0.0, b, c, 21);
            prop_assert!(nu_a > 0.0 && nu_a < 1.0);
            prop_assert!((0.0..=1.0).contains(&g));
            if a < b - 1e-9 {
                prop_assert!(nu_a > nu_b);
            }
        }
    }

    fn series(values: Vec<f64>) -> ReturnSeries {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        ReturnSeries {
            symbol: "X".into(),
            dates: (0..values.len()).map(|i| start + chrono::Days::new(i as u64)).collect(),
            values,
        }
    }

    #[test]
    fn constant_span_is_carried_forward() {
        let mut v: Vec<f64> = (0..30).map(|i| ((i * 7919) % 13) as f64 * 0.001 - 0.006).collect();
        v.extend(std::iter::repeat_n(0.0, 20));
        let rows = run_cpd(&series(v), 10, None);
        assert_eq!(rows.len(), 40);
        let last_fit = rows.iter().rposition(|r| r.fallback != Fallback::CarriedForward).unwrap();
        let tail = &rows[last_fit + 1..];
        assert!(!tail.is_empty());
        let mut g = rows[last_fit].gamma;
        for r in tail {
            assert_eq!(r.nu, rows[last_fit].nu);
            g = (g - 0.1f64).max(0.0);
            assert_abs_diff_eq!(r.gamma, g, epsilon = 1e-12);
            assert!(r.nlml_matern.is_nan());
        }
    }

    #[test]
    fn no_history_gives_neutral_row() {
        let rows = run_cpd(&series(vec![0.0; 15]), 10, None);
        assert!(rows.iter().all(|r| r.nu == 0.5 && r.fallback == Fallback::CarriedForward));
        assert_abs_diff_eq!(rows[1].gamma, 0.4, epsilon = 1e-12);
    }

    #[test]
    fn resume_skips_existing_rows() {
        let v: Vec<f64> = (0..40).map(|i| ((i * 31) % 17) as f64 * 0.001 - 0.008).collect();
        let s = series(v);
        let all = run_cpd(&s, 10, None);
        let existing: BTreeMap<_, _> = all[..12].iter().map(|r| (r.date, r.clone())).collect();
        let rest = run_cpd_resume(&s, 10, None, &existing);
        assert_eq!(rest, all[12..].to_vec());
        let range = run_cpd(&s, 10, Some((s.dates[20], s.dates[25])));
        assert_eq!(range.len(), 6);
        assert_eq!(range[0], all[10]);
    }
}
