//! Run configuration: a flat TOML file whose keys all have defaults.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::dmn::{FeatureConfig, SearchSpace, TrainConfig};
use crate::strategies::{MacdParams, StrategySpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Price CSV; defaults to `<out_dir>/prices.csv`.
    pub prices: Option<PathBuf>,
    /// Synthetic universe read by `gen-data`.
    pub synthetic_spec: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,

    pub vol_span: usize,
    pub winsorize_halflife: f64,
    pub winsorize_clip: f64,
    pub sigma_tgt: f64,

    pub return_offsets: Vec<usize>,
    pub macd_pairs: Vec<(usize, usize)>,
    pub macd_price_std_window: usize,
    pub macd_signal_std_window: usize,
    pub macd_response_scale: f64,

    pub cpd_lookbacks: Vec<usize>,
    /// Inclusive date bounds of the changepoint precompute.
    pub cpd_start: Option<NaiveDate>,
    pub cpd_end: Option<NaiveDate>,

    pub start_year: i32,
    pub end_year: i32,
    pub window_step: u32,

    pub strategies: Vec<String>,

    pub seq_len: usize,
    pub epochs: usize,
    pub patience: usize,
    pub train_fraction: f64,
    pub search_iters: usize,
    pub grid_dropout: Vec<f64>,
    pub grid_hidden_size: Vec<usize>,
    pub grid_minibatch_size: Vec<usize>,
    pub grid_learning_rate: Vec<f64>,
    pub grid_max_grad_norm: Vec<f64>,

    pub cost_grid_bps: Vec<f64>,
    pub changepoint_threshold: f64,
    pub regime_lookback: usize,
    pub regime_burn_in: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let macd = MacdParams::default();
        let grid = SearchSpace::default();
        let train = TrainConfig::default();
        Self {
            prices: None,
            synthetic_spec: None,
            out_dir: PathBuf::from("out"),
            seed: 42,
            workers: 0,
            vol_span: 60,
            winsorize_halflife: 252.0,
            winsorize_clip: 5.0,
            sigma_tgt: 0.15,
            return_offsets: FeatureConfig::default().offsets,
            macd_pairs: macd.pairs,
            macd_price_std_window: macd.price_std_window,
            macd_signal_std_window: macd.signal_std_window,
            macd_response_scale: macd.response_scale,
            cpd_lookbacks: crate::gp::DEFAULT_LOOKBACKS.to_vec(),
            cpd_start: None,
            cpd_end: None,
            start_year: 1990,
            end_year: 2020,
            window_step: 5,
            strategies: ["long_only", "moskowitz", "intermediate:w=0.5", "macd", "lstm", "lstm_cpd"]
                .map(String::from)
                .to_vec(),
            seq_len: train.seq_len,
            epochs: train.epochs,
            patience: train.patience,
            train_fraction: train.train_fraction,
            search_iters: 50,
            grid_dropout: grid.dropout,
            grid_hidden_size: grid.hidden_size,
            grid_minibatch_size: grid.minibatch_size,
            grid_learning_rate: grid.learning_rate,
            grid_max_grad_norm: grid.max_grad_norm,
            cost_grid_bps: crate::backtest::DEFAULT_COST_GRID_BPS.to_vec(),
            changepoint_threshold: 0.995,
            regime_lookback: 63,
            regime_burn_in: crate::backtest::REGIME_BURN_IN,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("config: {0}")]
pub struct ConfigError(pub String);

impl RunConfig {
    /// Parse and validate; relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        if let Some(p) = self.prices.as_mut() {
            fix(p);
        }
        if let Some(p) = self.synthetic_spec.as_mut() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: &str| Err(ConfigError(m.to_string()));
        if self.strategies.is_empty() {
            return err("strategy list is empty");
        }
        for s in &self.strategies {
            s.parse::<StrategySpec>().map_err(|e| ConfigError(format!("strategy {s:?}: {e}")))?;
        }
        for spec in self.strategy_specs()? {
            if let StrategySpec::LstmCpd { lbw: Some(l) } = spec {
                if !self.cpd_lookbacks.contains(&l) {
                    return Err(ConfigError(format!("lstm_cpd lookback {l} is not in cpd_lookbacks")));
                }
            }
        }
        if self.cpd_lookbacks.contains(&0) {
            return err("cpd lookbacks must be positive");
        }
        if self.sigma_tgt.is_nan() || self.sigma_tgt <= 0.0 {
            return err("sigma_tgt must be positive");
        }
        if self.vol_span < 1 || self.seq_len < 1 || self.epochs < 1 || self.search_iters < 1 {
            return err("vol_span, seq_len, epochs and search_iters must be at least 1");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return err("train_fraction must lie in (0, 1)");
        }
        if self.return_offsets.is_empty() || self.return_offsets.contains(&0) {
            return err("return offsets must be positive and non-empty");
        }
        if self.cost_grid_bps.iter().any(|c| c.is_nan() || *c < 0.0) {
            return err("cost levels must be non-negative");
        }
        self.macd().validate().map_err(|e| ConfigError(e.to_string()))?;
        self.search_space(None).validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(())
    }

    pub fn strategy_specs(&self) -> Result<Vec<StrategySpec>, ConfigError> {
        self.strategies
            .iter()
            .map(|s| s.parse().map_err(|e| ConfigError(format!("strategy {s:?}: {e}"))))
            .collect()
    }

    pub fn prices_path(&self) -> PathBuf {
        self.prices.clone().unwrap_or_else(|| self.out_dir.join("prices.csv"))
    }

    pub fn macd(&self) -> MacdParams {
        MacdParams {
            pairs: self.macd_pairs.clone(),
            price_std_window: self.macd_price_std_window,
            signal_std_window: self.macd_signal_std_window,
            response_scale: self.macd_response_scale,
        }
    }

    pub fn features(&self, cpd_lookback: Option<usize>) -> FeatureConfig {
        FeatureConfig { offsets: self.return_offsets.clone(), macd: self.macd(), cpd_lookback }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            patience: self.patience,
            seq_len: self.seq_len,
            train_fraction: self.train_fraction,
        }
    }

    /// Grid for one learned strategy; changepoint lookbacks are searched
    /// over `cpd_lookbacks` unless the strategy pins one.
    pub fn search_space(&self, spec: Option<&StrategySpec>) -> SearchSpace {
        let cpd_lookback = match spec {
            Some(StrategySpec::LstmCpd { lbw: Some(l) }) => vec![*l],
            Some(StrategySpec::LstmCpd { lbw: None }) => self.cpd_lookbacks.clone(),
            _ => Vec::new(),
        };
        SearchSpace {
            dropout: self.grid_dropout.clone(),
            hidden_size: self.grid_hidden_size.clone(),
            minibatch_size: self.grid_minibatch_size.clone(),
            learning_rate: self.grid_learning_rate.clone(),
            max_grad_norm: self.grid_max_grad_norm.clone(),
            cpd_lookback,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::from_toml("", Path::new("/base")).unwrap();
        assert_eq!(cfg.sigma_tgt, 0.15);
        assert_eq!(cfg.seq_len, 63);
        assert_eq!(cfg.epochs, 300);
        assert_eq!(cfg.patience, 25);
        assert_eq!(cfg.search_iters, 50);
        assert_eq!(cfg.cpd_lookbacks, vec![10, 21, 63, 126, 252]);
        assert_eq!(cfg.return_offsets, vec![1, 21, 63, 126, 252]);
        assert_eq!(cfg.macd_pairs, vec![(8, 24), (16, 28), (32, 96)]);
        assert_eq!(cfg.out_dir, Path::new("/base/out"));
        assert_eq!(cfg.prices_path(), Path::new("/base/out/prices.csv"));
    }

    #[test]
    fn overrides_and_errors() {
        let cfg = RunConfig::from_toml(
            "prices = \"/data/p.csv\"\nseed = 7\ncpd_lookbacks = [21]\nstrategies = [\"lstm_cpd\"]\nmacd_pairs = [[4, 12]]\n",
            Path::new("/base"),
        )
        .unwrap();
        assert_eq!(cfg.prices_path(), Path::new("/data/p.csv"));
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.macd().pairs, vec![(4, 12)]);
        assert_eq!(cfg.search_space(Some(&StrategySpec::LstmCpd { lbw: None })).cpd_lookback, vec![21]);
        assert!(RunConfig::from_toml("strategies = []", Path::new(".")).is_err());
        assert!(RunConfig::from_toml("strategies = [\"momentum\"]", Path::new(".")).is_err());
        assert!(RunConfig::from_toml("no_such_key = 1", Path::new(".")).is_err());
        assert!(RunConfig::from_toml("cpd_lookbacks = [21]\nstrategies = [\"lstm_cpd:lbw=63\"]", Path::new(".")).is_err());
        assert!(RunConfig::from_toml("grid_dropout = []", Path::new(".")).is_err());
    }
}
