//! Deep momentum network: an LSTM trained end to end on the Sharpe ratio
//! of its captured returns.

mod adam;
mod checkpoint;
mod features;
mod loss;
mod lstm;
mod search;
mod train;

use chrono::NaiveDate;
use thiserror::Error;

pub use adam::{clip_global_norm, Adam};
pub use checkpoint::{Checkpoint, CheckpointMeta, Tensor, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use features::{build_features, AssetFeatures, FeatureConfig, FeatureRow};
pub use loss::{sharpe_loss, sharpe_loss_grad, MIN_STD};
pub use lstm::{parameter_count, DropoutMasks, Lstm, LstmHyperparams, Trace};
pub use search::{best_trial, random_search, sample_trials, SearchSpace, TrialRecord};
pub use train::{build_dataset, evaluate, train, Dataset, EpochLog, Sequence, TrainConfig, TrainOutcome};

#[derive(Debug, Error)]
pub enum DmnError {
    #[error("captured returns have standard deviation {std:e}; Sharpe ratio undefined")]
    DegenerateLoss { std: f64 },
    #[error("input length {len} is not a positive multiple of the feature count {expected}")]
    Dimension { expected: usize, len: usize },
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("no changepoint row for {symbol} on {date} at lookback {lookback}")]
    MissingCpd { symbol: String, date: NaiveDate, lookback: usize },
    #[error("insufficient training data: {0}")]
    InsufficientData(String),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("training failed: {0}")]
    TrainingFailed(String),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
