//! File-based stages: prices CSV -> changepoint cache -> checkpoints ->
//! reports. Every stage reads only what earlier stages wrote.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backtest::{
    self, compute_metrics, concat, cost_sweep as sweep, metrics_lenient, plan_windows, position_diagnostics,
    read_asset_returns, read_metrics_table, regime_boundaries, rescale_to_target_vol, run_strategy, BacktestError,
    CostPoint, LearnedModel, MetricsRow, ReportRow, StrategyInputs, Window, WindowRow, METRIC_COLUMNS,
};
use crate::config::{ConfigError, RunConfig};
use crate::data::{load_prices, write_prices, AssetFrame, DataError, UniverseSpec};
use crate::dmn::{
    best_trial, build_dataset, build_features, random_search, train as train_model, AssetFeatures, Checkpoint,
    CheckpointMeta, DmnError, TrialRecord,
};
use crate::gp::{read_cache, run_cpd_resume, write_cache, CpdLookup, CpdResult, GpError};
use crate::strategies::{StrategyReturns, StrategySpec};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{what} not found at {}; {hint}", path.display())]
    Missing { what: &'static str, path: PathBuf, hint: &'static str },
    #[error("existing changepoint cache does not match this run: {0}")]
    CacheMismatch(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Dmn(#[from] DmnError),
    #[error(transparent)]
    Backtest(#[from] BacktestError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

type Result<T> = std::result::Result<T, PipelineError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    Ok(BufWriter::new(fs::File::create(path).map_err(io_err(path))?))
}

/// Write through a temporary sibling so readers never see a partial file.
fn write_atomic(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> Result<()>) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = create(&tmp)?;
        f(&mut w)?;
        w.flush().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Run `f` on a pool of `workers` threads (0 = all cores).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(e) => {
            warn!("could not build a thread pool ({e}); using the global pool");
            f()
        }
    }
}

/// Output file locations under the run directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(cfg: &RunConfig) -> Self {
        Self { root: cfg.out_dir.clone() }
    }
    pub fn cpd_cache(&self) -> PathBuf {
        self.root.join("cpd").join("cpd_cache.csv")
    }
    pub fn cpd_meta(&self) -> PathBuf {
        self.root.join("cpd").join("cpd_meta.json")
    }
    pub fn model_dir(&self, w: &Window, spec: &StrategySpec) -> PathBuf {
        self.root.join("models").join(w.label()).join(spec.slug())
    }
    pub fn best_checkpoint(&self, w: &Window, spec: &StrategySpec) -> PathBuf {
        self.model_dir(w, spec).join("best.json")
    }
    pub fn results_dir(&self, spec: &StrategySpec) -> PathBuf {
        self.root.join("results").join(spec.slug())
    }
    pub fn report(&self) -> PathBuf {
        self.root.join("report.csv")
    }
    pub fn report_rescaled(&self) -> PathBuf {
        self.root.join("report_rescaled.csv")
    }
    pub fn report_windows(&self) -> PathBuf {
        self.root.join("report_windows.csv")
    }
    pub fn cost_sweep(&self) -> PathBuf {
        self.root.join("cost_sweep.csv")
    }
    pub fn regimes(&self) -> PathBuf {
        self.root.join("regimes.csv")
    }
    pub fn report_text(&self) -> PathBuf {
        self.root.join("report.md")
    }
}

/// Synthesize the universe described by `spec_path` into a price CSV.
pub fn gen_data(spec_path: &Path, out: &Path) -> Result<usize> {
    let text = fs::read_to_string(spec_path).map_err(io_err(spec_path))?;
    let spec = UniverseSpec::from_toml(&text)?;
    let series = spec.generate()?;
    write_atomic(out, |w| Ok(write_prices(w, series.iter())?))?;
    info!("wrote {} symbols to {}", series.len(), out.display());
    Ok(series.len())
}

fn load_frames(cfg: &RunConfig) -> Result<Vec<AssetFrame>> {
    let path = cfg.prices_path();
    if !path.exists() {
        return Err(PipelineError::Missing {
            what: "price file",
            path,
            hint: "run `tsmom-cpd gen-data` or set `prices` in the config",
        });
    }
    load_prices(&path)?
        .values()
        .map(|p| AssetFrame::from_prices(p, cfg.vol_span).map_err(PipelineError::from))
        .collect()
}

fn winsorized(cfg: &RunConfig, frames: &[AssetFrame]) -> Vec<AssetFrame> {
    frames
        .iter()
        .map(|f| f.winsorized(cfg.winsorize_halflife, cfg.winsorize_clip, cfg.vol_span))
        .collect()
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Inputs that determine every cache row; rows from a different setting
/// must not be mixed in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpdMeta {
    pub prices_sha256: String,
    pub winsorize_halflife: f64,
    pub winsorize_clip: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CpdSummary {
    pub new_rows: usize,
    pub total_rows: usize,
}

/// Precompute changepoint scores for every asset, day and lookback in
/// scope, skipping rows already in the cache.
pub fn cpd(cfg: &RunConfig) -> Result<CpdSummary> {
    let layout = Layout::new(cfg);
    let frames = load_frames(cfg)?;
    let meta = CpdMeta {
        prices_sha256: sha256_file(&cfg.prices_path())?,
        winsorize_halflife: cfg.winsorize_halflife,
        winsorize_clip: cfg.winsorize_clip,
    };
    let cache_path = layout.cpd_cache();
    let meta_path = layout.cpd_meta();
    let mut existing: Vec<CpdResult> = Vec::new();
    if cache_path.exists() {
        let prior: Option<CpdMeta> = match fs::read_to_string(&meta_path) {
            Ok(text) => Some(serde_json::from_str(&text)?),
            Err(_) => None,
        };
        match prior {
            None => {
                return Err(PipelineError::CacheMismatch(format!(
                    "{} has no metadata file; remove the cache to rebuild it",
                    cache_path.display()
                )))
            }
            Some(p) if p != meta => {
                let mut why = Vec::new();
                if p.prices_sha256 != meta.prices_sha256 {
                    why.push("the price file has changed".to_string());
                }
                if p.winsorize_halflife != meta.winsorize_halflife || p.winsorize_clip != meta.winsorize_clip {
                    why.push(format!(
                        "winsorization was (halflife {}, clip {}), now (halflife {}, clip {})",
                        p.winsorize_halflife, p.winsorize_clip, meta.winsorize_halflife, meta.winsorize_clip
                    ));
                }
                return Err(PipelineError::CacheMismatch(format!(
                    "{}; remove {} or use a different out directory",
                    why.join(" and "),
                    cache_path.parent().unwrap_or(&cache_path).display()
                )));
            }
            Some(_) => {}
        }
        existing = read_cache(fs::File::open(&cache_path).map_err(io_err(&cache_path))?)?;
    }
    let mut by_key: HashMap<(String, usize), BTreeMap<chrono::NaiveDate, CpdResult>> = HashMap::new();
    for row in &existing {
        by_key.entry((row.symbol.clone(), row.lookback)).or_default().insert(row.date, row.clone());
    }
    let series: Vec<_> = winsorized(cfg, &frames).iter().map(|f| f.return_series()).collect();
    let jobs: Vec<(usize, usize)> =
        (0..series.len()).flat_map(|a| cfg.cpd_lookbacks.iter().map(move |&l| (a, l))).collect();
    let range = match (cfg.cpd_start, cfg.cpd_end) {
        (None, None) => None,
        (s, e) => Some((s.unwrap_or(chrono::NaiveDate::MIN), e.unwrap_or(chrono::NaiveDate::MAX))),
    };
    let empty = BTreeMap::new();
    let fresh: Vec<Vec<CpdResult>> = with_workers(cfg.workers, || {
        jobs.par_iter()
            .map(|&(a, l)| {
                let prior = by_key.get(&(series[a].symbol.clone(), l)).unwrap_or(&empty);
                let rows = run_cpd_resume(&series[a], l, range, prior);
                info!("{} lookback {l}: {} new rows", series[a].symbol, rows.len());
                rows
            })
            .collect()
    });
    let new_rows: usize = fresh.iter().map(Vec::len).sum();
    let mut all = existing;
    all.extend(fresh.into_iter().flatten());
    all.sort_by(|a, b| (&a.symbol, a.lookback, a.date).cmp(&(&b.symbol, b.lookback, b.date)));
    if new_rows > 0 || !cache_path.exists() {
        write_atomic(&cache_path, |w| Ok(write_cache(w, &all)?))?;
    }
    write_atomic(&meta_path, |w| {
        serde_json::to_writer_pretty(&mut *w, &meta)?;
        Ok(())
    })?;
    Ok(CpdSummary { new_rows, total_rows: all.len() })
}

fn load_lookup(layout: &Layout) -> Result<CpdLookup> {
    let path = layout.cpd_cache();
    if !path.exists() {
        return Err(PipelineError::Missing {
            what: "changepoint cache",
            path,
            hint: "run `tsmom-cpd cpd` with the same config first",
        });
    }
    let rows = read_cache(fs::File::open(&path).map_err(io_err(&path))?)?;
    Ok(rows.iter().collect())
}

fn features_for(
    cfg: &RunConfig,
    frames: &[AssetFrame],
    lookup: Option<&CpdLookup>,
    lookback: Option<usize>,
) -> Result<Vec<AssetFeatures>> {
    let fc = cfg.features(lookback);
    frames
        .par_iter()
        .map(|f| build_features(f, &fc, lookup, cfg.sigma_tgt).map_err(PipelineError::from))
        .collect()
}

fn mix_seed(seed: u64, window: usize, slug: &str) -> u64 {
    let mut h = seed ^ (window as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    for b in slug.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

fn read_trials(path: &Path) -> Result<Vec<TrialRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(io_err(path))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

fn trial_path(dir: &Path, trial: usize) -> PathBuf {
    dir.join(format!("trial_{trial:03}.json"))
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub window: String,
    pub strategy: String,
    pub trials: Vec<TrialRecord>,
    /// `None` when the window was skipped on resume.
    pub best: Option<TrialRecord>,
}

/// Random search per window and learned strategy. Writes every trial's
/// checkpoint, a JSON-lines search log and the winning `best.json`.
pub fn train(cfg: &RunConfig, resume: bool) -> Result<Vec<TrainSummary>> {
    let layout = Layout::new(cfg);
    let learned: Vec<StrategySpec> = cfg.strategy_specs()?.into_iter().filter(StrategySpec::is_learned).collect();
    if learned.is_empty() {
        info!("no learned strategies configured; nothing to train");
        return Ok(Vec::new());
    }
    let frames = winsorized(cfg, &load_frames(cfg)?);
    let lookup = if learned.iter().any(StrategySpec::uses_cpd) { Some(load_lookup(&layout)?) } else { None };
    let windows = plan_windows(cfg.start_year, cfg.end_year, cfg.window_step)?;
    let tcfg = cfg.train_config();
    let mut out = Vec::new();
    with_workers(cfg.workers, || -> Result<()> {
        let mut feature_sets: HashMap<Option<usize>, Vec<AssetFeatures>> = HashMap::new();
        for (wi, w) in windows.iter().enumerate() {
            for spec in &learned {
                let dir = layout.model_dir(w, spec);
                let best_path = layout.best_checkpoint(w, spec);
                let log_path = dir.join("trials.jsonl");
                if resume && best_path.exists() {
                    info!("{} {spec}: already trained, skipping", w.label());
                    out.push(TrainSummary {
                        window: w.label(),
                        strategy: spec.to_string(),
                        trials: read_trials(&log_path)?,
                        best: None,
                    });
                    continue;
                }
                fs::create_dir_all(&dir).map_err(io_err(&dir))?;
                let completed: Vec<TrialRecord> = if resume {
                    read_trials(&log_path)?
                        .into_iter()
                        .filter(|r| r.val_loss.is_none() || trial_path(&dir, r.trial).exists())
                        .collect()
                } else {
                    Vec::new()
                };
                // rewrite the log with only the trials being kept
                write_atomic(&log_path, |f| {
                    for r in &completed {
                        writeln!(f, "{}", serde_json::to_string(r)?).map_err(io_err(&log_path))?;
                    }
                    Ok(())
                })?;
                let space = cfg.search_space(Some(spec));
                let lookbacks: Vec<Option<usize>> = if space.cpd_lookback.is_empty() {
                    vec![None]
                } else {
                    space.cpd_lookback.iter().copied().map(Some).collect()
                };
                for l in lookbacks {
                    if let Entry::Vacant(slot) = feature_sets.entry(l) {
                        slot.insert(features_for(cfg, &frames, lookup.as_ref(), l)?);
                    }
                }
                let mut log = fs::OpenOptions::new().append(true).open(&log_path).map_err(io_err(&log_path))?;
                let records = random_search(
                    &space,
                    cfg.search_iters,
                    mix_seed(cfg.seed, wi, &spec.slug()),
                    &completed,
                    |trial, hp, seed| {
                        info!("{} {spec}: trial {trial} {hp:?}", w.label());
                        let data = build_dataset(&feature_sets[&hp.cpd_lookback], w.train_start, w.train_end, &tcfg)?;
                        let fit = train_model(&data, hp, &tcfg, seed)?;
                        let meta = CheckpointMeta {
                            hyperparams: *hp,
                            features: cfg.features(hp.cpd_lookback),
                            train: tcfg,
                            sigma_tgt: cfg.sigma_tgt,
                            seed,
                            train_start: Some(w.train_start),
                            train_end: Some(w.train_end),
                            val_loss: Some(fit.val_loss),
                        };
                        Checkpoint::new(&fit.model, meta).save(&trial_path(&dir, trial))?;
                        Ok(fit.val_loss)
                    },
                    |rec| {
                        writeln!(log, "{}", serde_json::to_string(rec)?)?;
                        Ok(())
                    },
                )?;
                let best = best_trial(&records).cloned().expect("random search returns a finite trial");
                fs::copy(trial_path(&dir, best.trial), &best_path).map_err(io_err(&best_path))?;
                info!("{} {spec}: best trial {} loss {:?}", w.label(), best.trial, best.val_loss);
                out.push(TrainSummary { window: w.label(), strategy: spec.to_string(), trials: records, best: Some(best) });
            }
        }
        Ok(())
    })?;
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct BacktestSummary {
    /// Pooled metrics before and after volatility rescaling.
    pub pooled: Vec<ReportRow>,
    pub rescaled: Vec<ReportRow>,
    pub windows: Vec<WindowRow>,
    pub returns: Vec<(StrategySpec, StrategyReturns)>,
}

fn rescaled_metrics(r: &[f64], sigma_tgt: f64) -> MetricsRow {
    match rescale_to_target_vol(r, sigma_tgt) {
        Ok(s) => metrics_lenient(&s),
        Err(_) => metrics_lenient(&[]),
    }
}

/// Run every configured strategy over every test window and write the
/// report files.
pub fn run_backtest(cfg: &RunConfig) -> Result<BacktestSummary> {
    let layout = Layout::new(cfg);
    let specs = cfg.strategy_specs()?;
    let raw = load_frames(cfg)?;
    let wins = winsorized(cfg, &raw);
    let windows = plan_windows(cfg.start_year, cfg.end_year, cfg.window_step)?;
    let lookup = if layout.cpd_cache().exists() {
        Some(load_lookup(&layout)?)
    } else if specs.iter().any(StrategySpec::uses_cpd) {
        return Err(load_lookup(&layout).unwrap_err());
    } else {
        None
    };
    let macd = cfg.macd();
    let inputs = StrategyInputs { frames: &raw, macd: &macd, sigma_tgt: cfg.sigma_tgt };
    let mut summary = BacktestSummary { pooled: Vec::new(), rescaled: Vec::new(), windows: Vec::new(), returns: Vec::new() };

    with_workers(cfg.workers, || -> Result<()> {
        for spec in &specs {
            let mut parts = Vec::new();
            for w in &windows {
                let r = if spec.is_learned() {
                    let path = layout.best_checkpoint(w, spec);
                    if !path.exists() {
                        return Err(PipelineError::Missing {
                            what: "model checkpoint",
                            path,
                            hint: "run `tsmom-cpd train` with the same config first",
                        });
                    }
                    let ck = Checkpoint::load(&path)?;
                    let model = ck.model()?;
                    let feats: Vec<AssetFeatures> = wins
                        .par_iter()
                        .map(|f| build_features(f, &ck.features, lookup.as_ref(), ck.sigma_tgt))
                        .collect::<std::result::Result<_, _>>()?;
                    let learned = LearnedModel { model: &model, features: &feats, seq_len: ck.train.seq_len };
                    run_strategy(spec, &inputs, w, Some(&learned))?
                } else {
                    run_strategy(spec, &inputs, w, None)?
                };
                let values = r.portfolio_values();
                if let Err(e) = compute_metrics(&values) {
                    warn!("{spec} {}: {e}", w.label());
                }
                summary.windows.push(WindowRow {
                    window: w.label(),
                    group: spec.group().to_string(),
                    strategy: spec.to_string(),
                    metrics: metrics_lenient(&values),
                });
                parts.push(r);
            }
            let pooled = concat(&parts);
            let values = pooled.portfolio_values();
            let row = |metrics| ReportRow { group: spec.group().to_string(), strategy: spec.to_string(), metrics };
            summary.pooled.push(row(metrics_lenient(&values)));
            summary.rescaled.push(row(rescaled_metrics(&values, cfg.sigma_tgt)));
            write_strategy_outputs(cfg, &layout, spec, &pooled)?;
            summary.returns.push((*spec, pooled));
        }
        Ok(())
    })?;

    write_atomic(&layout.report(), |w| Ok(backtest::write_metrics_table(w, &summary.pooled)?))?;
    write_atomic(&layout.report_rescaled(), |w| Ok(backtest::write_metrics_table(w, &summary.rescaled)?))?;
    write_atomic(&layout.report_windows(), |w| Ok(backtest::write_window_table(w, &summary.windows)?))?;
    write_cost_sweep_table(cfg, &layout, &summary.returns)?;
    if let Some(lookup) = &lookup {
        write_regimes(cfg, &layout, lookup, &raw)?;
    }
    Ok(summary)
}

fn write_strategy_outputs(cfg: &RunConfig, layout: &Layout, spec: &StrategySpec, r: &StrategyReturns) -> Result<()> {
    let dir = layout.results_dir(spec);
    write_atomic(&dir.join("portfolio_returns.csv"), |w| Ok(backtest::write_portfolio_returns(w, &r.portfolio)?))?;
    write_atomic(&dir.join("asset_returns.csv"), |w| Ok(backtest::write_asset_returns(w, r)?))?;
    write_atomic(&dir.join("equity.csv"), |w| Ok(backtest::write_equity_curve(w, &r.portfolio)?))?;
    let averages: Vec<_> = r
        .per_asset
        .iter()
        .map(|(s, days)| {
            let x: Vec<_> = days.iter().map(|d| (d.date, d.position)).collect();
            (s.clone(), position_diagnostics(&x, backtest::LONG_AVERAGE, backtest::SHORT_AVERAGE))
        })
        .collect();
    write_atomic(&dir.join("positions_ma.csv"), |w| Ok(backtest::write_position_averages(w, &averages)?))?;
    let curve = sweep(r, cfg.sigma_tgt, &cfg.cost_grid_bps);
    write_atomic(&dir.join("cost_curve.csv"), |w| Ok(backtest::write_cost_curve(w, &curve)?))?;
    Ok(())
}

fn write_regimes(cfg: &RunConfig, layout: &Layout, lookup: &CpdLookup, frames: &[AssetFrame]) -> Result<()> {
    let available = lookup.lookbacks();
    let Some(&l) = available.iter().find(|&&l| l == cfg.regime_lookback).or(available.first()) else {
        return Ok(());
    };
    let rows: Vec<_> = frames
        .iter()
        .map(|f| {
            let severity: Vec<_> =
                f.dates.iter().filter_map(|&d| lookup.get(&f.symbol, l, d).map(|(nu, _)| (d, nu))).collect();
            (f.symbol.clone(), regime_boundaries(&severity, cfg.changepoint_threshold, cfg.regime_burn_in))
        })
        .collect();
    write_atomic(&layout.regimes(), |w| Ok(backtest::write_regimes(w, &rows)?))
}

fn write_cost_sweep_table(cfg: &RunConfig, layout: &Layout, returns: &[(StrategySpec, StrategyReturns)]) -> Result<Vec<(String, Vec<CostPoint>)>> {
    let curves: Vec<(String, Vec<CostPoint>)> = returns
        .iter()
        .map(|(spec, r)| (spec.to_string(), sweep(r, cfg.sigma_tgt, &cfg.cost_grid_bps)))
        .collect();
    write_atomic(&layout.cost_sweep(), |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["strategy", "C_bps", "sharpe"]).map_err(BacktestError::from)?;
        for (s, curve) in &curves {
            for p in curve {
                out.write_record([s.clone(), p.c_bps.to_string(), p.sharpe.to_string()]).map_err(BacktestError::from)?;
            }
        }
        out.flush().map_err(BacktestError::from)?;
        Ok(())
    })?;
    Ok(curves)
}

/// Recompute cost curves from the per-asset returns written by the backtest.
pub fn cost_sweep(cfg: &RunConfig) -> Result<Vec<(String, Vec<CostPoint>)>> {
    let layout = Layout::new(cfg);
    let mut returns = Vec::new();
    for spec in cfg.strategy_specs()? {
        let path = layout.results_dir(&spec).join("asset_returns.csv");
        if !path.exists() {
            return Err(PipelineError::Missing {
                what: "strategy returns",
                path,
                hint: "run `tsmom-cpd backtest` with the same config first",
            });
        }
        let r = read_asset_returns(fs::File::open(&path).map_err(io_err(&path))?)?;
        let curve = sweep(&r, cfg.sigma_tgt, &cfg.cost_grid_bps);
        let out = layout.results_dir(&spec).join("cost_curve.csv");
        write_atomic(&out, |w| Ok(backtest::write_cost_curve(w, &curve)?))?;
        returns.push((spec, r));
    }
    write_cost_sweep_table(cfg, &layout, &returns)
}

fn format_table(title: &str, rows: &[ReportRow]) -> String {
    let mut s = format!("## {title}\n\n| group | strategy | {} |\n", METRIC_COLUMNS.join(" | "));
    s.push_str(&format!("|{}\n", "---|".repeat(METRIC_COLUMNS.len() + 2)));
    for r in rows {
        let cells: Vec<String> = r.metrics.values().iter().map(|v| format!("{v:.4}")).collect();
        s.push_str(&format!("| {} | {} | {} |\n", r.group, r.strategy, cells.join(" | ")));
    }
    s
}

/// Markdown summary of the backtest tables; also written to `report.md`.
pub fn report(cfg: &RunConfig) -> Result<String> {
    let layout = Layout::new(cfg);
    let mut text = String::new();
    for (title, path) in [
        ("Pooled test returns", layout.report()),
        ("Rescaled to target volatility", layout.report_rescaled()),
    ] {
        if !path.exists() {
            return Err(PipelineError::Missing {
                what: "backtest report",
                path,
                hint: "run `tsmom-cpd backtest` with the same config first",
            });
        }
        let rows = read_metrics_table(fs::File::open(&path).map_err(io_err(&path))?)?;
        text.push_str(&format_table(title, &rows));
        text.push('\n');
    }
    let out = layout.report_text();
    write_atomic(&out, |w| w.write_all(text.as_bytes()).map_err(io_err(&out)))?;
    Ok(text)
}
