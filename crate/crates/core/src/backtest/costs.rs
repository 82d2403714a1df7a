//! Turnover-based transaction costs.

use serde::{Deserialize, Serialize};

use super::metrics::metrics_lenient;
use crate::strategies::{aggregate, AssetDay, StrategyReturns};

pub const DEFAULT_COST_GRID_BPS: [f64; 6] = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];

fn leverage(d: &AssetDay) -> f64 {
    if d.sigma > 0.0 {
        d.position / d.sigma
    } else {
        0.0
    }
}

/// `R_t - C sigma_tgt |X_t/sigma_t - X_{t-1}/sigma_{t-1}|` along one asset's
/// days. `cost` is a decimal (2 bps = 0.0002); the first day has no prior
/// position and pays nothing.
pub fn transaction_adjusted_returns(days: &[AssetDay], sigma_tgt: f64, cost: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(days.len());
    for (k, d) in days.iter().enumerate() {
        if k == 0 || cost == 0.0 {
            out.push(d.captured);
        } else {
            let turnover = (leverage(d) - leverage(&days[k - 1])).abs();
            out.push(d.captured - cost * sigma_tgt * turnover);
        }
    }
    out
}

/// Strategy returns with every asset's captured return net of costs.
pub fn with_costs(r: &StrategyReturns, sigma_tgt: f64, cost: f64) -> StrategyReturns {
    let per_asset = r
        .per_asset
        .iter()
        .map(|(s, days)| {
            let adjusted = transaction_adjusted_returns(days, sigma_tgt, cost);
            let days = days.iter().zip(adjusted).map(|(d, c)| AssetDay { captured: c, ..*d }).collect();
            (s.clone(), days)
        })
        .collect();
    let portfolio = aggregate(&per_asset, |d| d.captured);
    StrategyReturns { per_asset, portfolio }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostPoint {
    pub c_bps: f64,
    pub sharpe: f64,
}

/// Portfolio Sharpe ratio at each cost level in basis points.
pub fn cost_sweep(r: &StrategyReturns, sigma_tgt: f64, grid_bps: &[f64]) -> Vec<CostPoint> {
    grid_bps
        .iter()
        .map(|&c_bps| {
            let adj = with_costs(r, sigma_tgt, c_bps * 1e-4);
            CostPoint { c_bps, sharpe: metrics_lenient(&adj.portfolio_values()).sharpe }
        })
        .collect()
}
