//! Slow momentum with fast reversion: Gaussian-process changepoint
//! detection feeding an LSTM Deep Momentum Network, classical time-series
//! momentum benchmarks, and an expanding-window futures backtester.

pub mod backtest;
pub mod config;
pub mod data;
pub mod dmn;
pub mod gp;
pub mod optim;
pub mod pipeline;
pub mod strategies;
