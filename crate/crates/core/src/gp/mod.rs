//! Online changepoint detection with Gaussian processes.
//!
//! Each trailing window of standardized returns is fitted twice: once with a
//! stationary Matérn-3/2 kernel and once with a sigmoid changepoint kernel.
//! The drop in negative log marginal likelihood becomes the severity score
//! and the fitted location becomes the normalized changepoint position.

mod cache;
mod cpd;
mod fit;
mod kernel;
mod likelihood;

pub use cache::{read_cache, write_cache, CpdLookup, CACHE_HEADER};
pub use cpd::{cpd_score_location, run_cpd, run_cpd_resume, CpdResult, Fallback, DEFAULT_LOOKBACKS};
pub use fit::{
    fit_changepoint, fit_changepoint_from, fit_matern, fit_matern_from, location_bounds,
    ChangepointFit, GpFit, LENGTH_SCALE_BOUNDS, LOCATION_MARGIN, NOISE_BOUNDS,
    OUTPUT_SCALE_BOUNDS, STEEPNESS_BOUNDS,
};
pub use kernel::{
    changepoint_kernel, matern32, noisy_covariance, region_switch_kernel, sigmoid_blend,
    ChangepointHypers, Matern32, MaternHypers,
};
pub use likelihood::{factorize_with_jitter, nlml, nlml_with_grad, JITTER_MAX, JITTER_START};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GpError {
    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("non-finite marginal likelihood")]
    NonFinite,
    #[error("optimizer: {0}")]
    Optim(#[from] crate::optim::OptimError),
    #[error("changepoint fit failed: {0}")]
    FitFailed(String),
    #[error("cache line {line}: {message}")]
    Cache { line: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
