//! The nine-column performance summary of a daily return stream.

use serde::{Deserialize, Serialize};

use super::BacktestError;
use crate::data::ANNUALIZATION;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub returns_ann: f64,
    pub vol_ann: f64,
    pub sharpe: f64,
    pub downside_dev_ann: f64,
    pub sortino: f64,
    /// Fraction of the running peak of the compounded equity curve.
    pub mdd: f64,
    pub calmar: f64,
    /// Percent of days with a positive return.
    pub pct_positive: f64,
    pub avg_p_over_avg_l: f64,
}

pub const METRIC_COLUMNS: [&str; 9] = [
    "returns_ann",
    "vol_ann",
    "sharpe",
    "downside_dev_ann",
    "sortino",
    "mdd",
    "calmar",
    "pct_positive",
    "avg_p_over_avg_l",
];

impl MetricsRow {
    pub fn values(&self) -> [f64; 9] {
        [
            self.returns_ann,
            self.vol_ann,
            self.sharpe,
            self.downside_dev_ann,
            self.sortino,
            self.mdd,
            self.calmar,
            self.pct_positive,
            self.avg_p_over_avg_l,
        ]
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population standard deviation.
pub fn std_pop(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Largest peak-to-trough decline of `prod(1 + r)` as a fraction of the peak.
pub fn max_drawdown(r: &[f64]) -> f64 {
    let mut equity = 1.0;
    let mut peak = 1.0;
    let mut mdd: f64 = 0.0;
    for v in r {
        equity *= 1.0 + v;
        peak = f64::max(peak, equity);
        mdd = mdd.max((peak - equity) / peak);
    }
    mdd
}

/// All nine metrics with NaN where a ratio is undefined.
pub fn metrics_lenient(r: &[f64]) -> MetricsRow {
    if r.is_empty() {
        return MetricsRow {
            returns_ann: f64::NAN,
            vol_ann: f64::NAN,
            sharpe: f64::NAN,
            downside_dev_ann: f64::NAN,
            sortino: f64::NAN,
            mdd: f64::NAN,
            calmar: f64::NAN,
            pct_positive: f64::NAN,
            avg_p_over_avg_l: f64::NAN,
        };
    }
    let n = r.len() as f64;
    let k = ANNUALIZATION.sqrt();
    let m = mean(r);
    let sd = std_pop(r);
    let downside = (r.iter().filter(|v| **v < 0.0).map(|v| v * v).sum::<f64>() / n).sqrt();
    let mdd = max_drawdown(r);
    let pos: Vec<f64> = r.iter().copied().filter(|v| *v > 0.0).collect();
    let neg: Vec<f64> = r.iter().copied().filter(|v| *v < 0.0).collect();
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { f64::NAN };
    let avg_p = if pos.is_empty() { 0.0 } else { mean(&pos) };
    let avg_l = if neg.is_empty() { 0.0 } else { mean(&neg).abs() };
    MetricsRow {
        returns_ann: ANNUALIZATION * m,
        vol_ann: k * sd,
        sharpe: ratio(k * m, sd),
        downside_dev_ann: k * downside,
        sortino: ratio(ANNUALIZATION * m, k * downside),
        mdd,
        calmar: ratio(ANNUALIZATION * m, mdd),
        pct_positive: 100.0 * pos.len() as f64 / n,
        avg_p_over_avg_l: ratio(avg_p, avg_l),
    }
}

/// Metrics that refuse undefined ratios.
pub fn compute_metrics(r: &[f64]) -> Result<MetricsRow, BacktestError> {
    if r.len() < 2 {
        return Err(BacktestError::TooFewObservations(r.len()));
    }
    let row = metrics_lenient(r);
    if row.mdd == 0.0 {
        return Err(BacktestError::Undefined { metric: "calmar", reason: "zero maximum drawdown" });
    }
    if row.sharpe.is_nan() {
        return Err(BacktestError::Undefined { metric: "sharpe", reason: "zero volatility" });
    }
    Ok(row)
}

/// Scale so that the annualized volatility over the span equals `sigma_tgt`.
pub fn rescale_to_target_vol(r: &[f64], sigma_tgt: f64) -> Result<Vec<f64>, BacktestError> {
    let sd = if r.is_empty() { 0.0 } else { std_pop(r) };
    if sd <= 0.0 || !sd.is_finite() {
        return Err(BacktestError::ZeroVolatility);
    }
    let k = sigma_tgt / (ANNUALIZATION.sqrt() * sd);
    Ok(r.iter().map(|v| v * k).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn alternating_series() {
        let r: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 0.01 } else { -0.01 }).collect();
        let m = compute_metrics(&r).unwrap();
        assert!(m.sharpe.abs() < 1e-12);
        assert_eq!(m.pct_positive, 50.0);
        assert!((m.avg_p_over_avg_l - 1.0).abs() < 1e-12);
        assert!((m.vol_ann - 0.01 * 252f64.sqrt()).abs() < 1e-12);
        assert!((m.downside_dev_ann - (0.0001f64 / 2.0).sqrt() * 252f64.sqrt()).abs() < 1e-12);
        // 1.01 * 0.99 per pair, drawdown from the highest peak 1.01
        let mut e: f64 = 1.0;
        let mut peak: f64 = 1.0;
        let mut worst: f64 = 0.0;
        for v in &r {
            e *= 1.0 + v;
            peak = peak.max(e);
            worst = worst.max(1.0 - e / peak);
        }
        assert!((m.mdd - worst).abs() < 1e-15);
    }

    #[test]
    fn monotone_equity_has_undefined_calmar() {
        let r = vec![0.001; 50];
        assert!(matches!(compute_metrics(&r), Err(BacktestError::Undefined { metric: "calmar", .. })));
        assert!(metrics_lenient(&r).calmar.is_nan());
        assert!(compute_metrics(&[0.01]).is_err());
    }

    #[test]
    fn hand_computed_example() {
        let r = [0.02, -0.01, 0.03, -0.02];
        let m = compute_metrics(&r).unwrap();
        let mean = 0.005;
        let sd = ((0.015f64.powi(2) + 0.015f64.powi(2) + 0.025f64.powi(2) + 0.025f64.powi(2)) / 4.0).sqrt();
        assert!((m.returns_ann - 252.0 * mean).abs() < 1e-12);
        assert!((m.sharpe - 252f64.sqrt() * mean / sd).abs() < 1e-12);
        let dd = ((0.0001f64 + 0.0004) / 4.0).sqrt();
        assert!((m.sortino - 252.0 * mean / (252f64.sqrt() * dd)).abs() < 1e-12);
        // equity 1.02, 1.0098, 1.040094, 1.01929212; worst is 1.040094 -> 1.01929212
        assert!((m.mdd - 0.02).abs() < 1e-12);
        assert!((m.calmar - 252.0 * mean / 0.02).abs() < 1e-9);
        assert_eq!(m.pct_positive, 50.0);
        assert!((m.avg_p_over_avg_l - 0.025 / 0.015).abs() < 1e-12);
    }

    #[test]
    fn gaussian_sharpe_estimate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = Normal::new(0.0004, 0.01).unwrap();
        let r: Vec<f64> = (0..2520).map(|_| n.sample(&mut rng)).collect();
        let m = compute_metrics(&r).unwrap();
        assert!((m.sharpe - 252f64.sqrt() * 0.04).abs() < 0.25, "{}", m.sharpe);
    }

    #[test]
    fn rescale_zero_vol_fails() {
        assert!(rescale_to_target_vol(&[0.01; 5], 0.15).is_err());
        assert!(rescale_to_target_vol(&[], 0.15).is_err());
    }

    proptest! {
        #[test]
        fn rescaling_preserves_ratios(r in prop::collection::vec(-0.05f64..0.05, 10..200)) {
            let before = metrics_lenient(&r);
            prop_assume!(before.vol_ann > 1e-8);
            let scaled = rescale_to_target_vol(&r, 0.15).unwrap();
            let after = metrics_lenient(&scaled);
            prop_assert!((after.vol_ann - 0.15).abs() < 1e-10);
            prop_assert!((after.sharpe - before.sharpe).abs() < 1e-9 * (1.0 + before.sharpe.abs()));
            prop_assert!((after.sortino - before.sortino).abs() < 1e-9 * (1.0 + before.sortino.abs())
                || (after.sortino.is_nan() && before.sortino.is_nan()));
            prop_assert_eq!(after.pct_positive, before.pct_positive);
            prop_assert!((after.avg_p_over_avg_l - before.avg_p_over_avg_l).abs() < 1e-9 * (1.0 + before.avg_p_over_avg_l.abs())
                || (after.avg_p_over_avg_l.is_nan() && before.avg_p_over_avg_l.is_nan()));
        }

        #[test]
        fn metric_ranges(r in prop::collection::vec(-0.5f64..0.5, 1..100)) {
            let m = metrics_lenient(&r);
            prop_assert!(m.vol_ann >= 0.0);
            prop_assert!(m.mdd >= 0.0 && m.mdd <= 1.0);
            prop_assert!((0.0..=100.0).contains(&m.pct_positive));
        }
    }
}
