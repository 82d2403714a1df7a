//! Expanding-window experiments, performance metrics, volatility
//! rescaling, transaction costs and position diagnostics.

mod costs;
mod diagnostics;
mod metrics;
mod report;
mod runner;
mod windows;

use thiserror::Error;

pub use costs::{cost_sweep, transaction_adjusted_returns, with_costs, CostPoint, DEFAULT_COST_GRID_BPS};
pub use diagnostics::{
    position_diagnostics, regime_boundaries, PositionAverages, LONG_AVERAGE, REGIME_BURN_IN, SHORT_AVERAGE,
};
pub use metrics::{compute_metrics, max_drawdown, metrics_lenient, rescale_to_target_vol, std_pop, MetricsRow, METRIC_COLUMNS};
pub use report::{
    equity_curve, read_asset_returns, read_metrics_table, write_asset_returns, write_cost_curve, write_equity_curve,
    write_metrics_table, write_portfolio_returns, write_position_averages, write_regimes, write_window_table,
    ReportRow, WindowRow,
};
pub use runner::{concat, lstm_position, run_strategy, LearnedModel, StrategyInputs};
pub use windows::{plan_windows, Window};

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("span {start_year}-{end_year} holds no full train/test cycle of {step} years")]
    SpanTooShort { start_year: i32, end_year: i32, step: u32 },
    #[error("need at least 2 observations, got {0}")]
    TooFewObservations(usize),
    #[error("{metric} undefined: {reason}")]
    Undefined { metric: &'static str, reason: &'static str },
    #[error("zero realized volatility; cannot rescale")]
    ZeroVolatility,
    #[error("strategy {0} requires a trained model")]
    Untrained(String),
    #[error("report: {0}")]
    Report(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
