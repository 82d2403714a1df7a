use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use tsmom_cpd::config::RunConfig;
use tsmom_cpd::data::{generate_synthetic, regime_universe, write_prices, AssetFrame, PriceSeries, RegimeSegment, RegimeSpec};
use tsmom_cpd::dmn::{build_dataset, build_features, train, FeatureConfig, LstmHyperparams, TrainConfig};
use tsmom_cpd::pipeline::{self, PipelineError};
use tsmom_cpd::strategies::{classical_positions, MacdParams, StrategySpec};

fn write(path: &Path, series: &[PriceSeries]) {
    let mut f = fs::File::create(path).unwrap();
    write_prices(&mut f, series.iter()).unwrap();
}

fn small_universe(n_assets: usize, days: usize, seed: u64) -> Vec<PriceSeries> {
    let start = NaiveDate::from_ymd_opt(2000, 1, 3).unwrap();
    regime_universe(n_assets, days, 120, 0.001, 0.01, true, start, seed).generate().unwrap()
}

fn config(dir: &Path) -> RunConfig {
    RunConfig {
        out_dir: dir.join("out"),
        prices: Some(dir.join("prices.csv")),
        cpd_lookbacks: vec![21],
        start_year: 2000,
        end_year: 2006,
        window_step: 3,
        epochs: 3,
        search_iters: 2,
        grid_hidden_size: vec![3],
        grid_minibatch_size: vec![16],
        workers: 1,
        ..RunConfig::default()
    }
}

#[test]
fn cpd_cache_is_resumable_and_guarded() {
    let dir = tempfile::tempdir().unwrap();
    let spec = RegimeSpec { segments: vec![RegimeSegment { length: 299, drift: 0.0, vol: 0.01 }], seed: 3, start_price: 100.0 };
    let p = generate_synthetic("X", NaiveDate::from_ymd_opt(2001, 1, 1).unwrap(), &spec).unwrap();
    assert_eq!(p.len(), 300);
    write(&dir.path().join("prices.csv"), std::slice::from_ref(&p));
    let cfg = config(dir.path());

    let first = pipeline::cpd(&cfg).unwrap();
    // 299 returns, one row per window end from index 21
    assert_eq!(first.new_rows, 299 - 21);
    let again = pipeline::cpd(&cfg).unwrap();
    assert_eq!(again.new_rows, 0);
    assert_eq!(again.total_rows, first.total_rows);

    let mut other = cfg.clone();
    other.cpd_lookbacks = vec![21, 10];
    assert_eq!(pipeline::cpd(&other).unwrap().new_rows, 299 - 10);

    let mut changed = cfg.clone();
    changed.winsorize_clip = 4.0;
    let err = pipeline::cpd(&changed).unwrap_err();
    assert!(matches!(err, PipelineError::CacheMismatch(_)), "{err}");
    assert!(err.to_string().contains("winsorization"));

    let mut closes = p.closes.clone();
    closes[100] *= 1.01;
    write(&dir.path().join("prices.csv"), &[PriceSeries::new("X", p.dates.clone(), closes).unwrap()]);
    let err = pipeline::cpd(&cfg).unwrap_err();
    assert!(err.to_string().contains("price file has changed"), "{err}");
}

#[test]
fn missing_inputs_name_the_stage_to_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let err = pipeline::cpd(&cfg).unwrap_err();
    assert!(matches!(err, PipelineError::Missing { what: "price file", .. }));

    write(&dir.path().join("prices.csv"), &small_universe(1, 400, 1));
    let mut cpd_cfg = cfg.clone();
    cpd_cfg.strategies = vec!["lstm_cpd".into()];
    let err = pipeline::train(&cpd_cfg, false).unwrap_err();
    assert!(err.to_string().contains("tsmom-cpd cpd"), "{err}");
    let err = pipeline::report(&cfg).unwrap_err();
    assert!(err.to_string().contains("tsmom-cpd backtest"), "{err}");
}

#[test]
fn train_logs_trials_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    write(&dir.path().join("prices.csv"), &small_universe(2, 8 * 261, 5));
    let mut cfg = config(dir.path());
    cfg.strategies = vec!["lstm".into()];
    cfg.end_year = 2008;
    cfg.window_step = 4;

    let out = pipeline::train(&cfg, false).unwrap();
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].trials.len(), 2);
    let model_dir = cfg.out_dir.join("models").join("2004-2008").join("lstm");
    let log = fs::read_to_string(model_dir.join("trials.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2);
    assert!(model_dir.join("best.json").exists());
    let best_before = fs::read(model_dir.join("best.json")).unwrap();

    let resumed = pipeline::train(&cfg, true).unwrap();
    assert!(resumed[0].best.is_none());
    assert_eq!(fs::read(model_dir.join("best.json")).unwrap(), best_before);

    // an interrupted search reuses the logged trial and reruns the rest
    fs::remove_file(model_dir.join("best.json")).unwrap();
    let first_line = log.lines().next().unwrap().to_string();
    fs::write(model_dir.join("trials.jsonl"), format!("{first_line}\n")).unwrap();
    let rerun = pipeline::train(&cfg, true).unwrap();
    assert_eq!(rerun[0].trials.len(), 2);
    assert_eq!(fs::read(model_dir.join("best.json")).unwrap(), best_before);

    // a fresh run reproduces the same checkpoint
    pipeline::train(&cfg, false).unwrap();
    assert_eq!(fs::read(model_dir.join("best.json")).unwrap(), best_before);
}

#[test]
fn benchmarks_only_backtest_reports_reference_and_tsmom() {
    let dir = tempfile::tempdir().unwrap();
    write(&dir.path().join("prices.csv"), &small_universe(3, 6 * 261, 9));
    let mut cfg = config(dir.path());
    cfg.strategies = vec!["long_only".into(), "moskowitz".into(), "intermediate:w=0.5".into(), "macd".into()];
    let s = pipeline::run_backtest(&cfg).unwrap();
    let groups: Vec<&str> = s.pooled.iter().map(|r| r.group.as_str()).collect();
    assert_eq!(groups, vec!["Reference", "TSMOM", "TSMOM", "Reference"]);
    let text = fs::read_to_string(cfg.out_dir.join("report.csv")).unwrap();
    assert!(text.lines().next().unwrap().ends_with("mdd,calmar,pct_positive,avg_p_over_avg_l"));
    assert_eq!(text.lines().count(), 5);
    assert!(cfg.out_dir.join("results").join("macd").join("cost_curve.csv").exists());
    let report = pipeline::report(&cfg).unwrap();
    assert!(report.contains("| TSMOM | moskowitz |"));
    let curves = pipeline::cost_sweep(&cfg).unwrap();
    assert_eq!(curves.len(), 4);
    for (_, c) in &curves {
        assert!(c.windows(2).all(|p| p[1].sharpe <= p[0].sharpe));
    }
}

#[test]
fn test_period_prices_never_reach_training_or_earlier_positions() {
    let series = small_universe(2, 5 * 261, 11);
    let train_end = NaiveDate::from_ymd_opt(2004, 1, 1).unwrap();
    let perturbed: Vec<PriceSeries> = series
        .iter()
        .map(|p| {
            let k = p.dates.iter().position(|d| *d >= NaiveDate::from_ymd_opt(2004, 6, 1).unwrap()).unwrap();
            let mut closes = p.closes.clone();
            for c in &mut closes[k..] {
                *c *= 1.3;
            }
            PriceSeries::new(&p.symbol, p.dates.clone(), closes).unwrap()
        })
        .collect();
    let fit = |data: &[PriceSeries]| {
        let feats: Vec<_> = data
            .iter()
            .map(|p| {
                let f = AssetFrame::from_prices(p, 60).unwrap().winsorized(252.0, 5.0, 60);
                build_features(&f, &FeatureConfig::default(), None, 0.15).unwrap()
            })
            .collect();
        let cfg = TrainConfig { epochs: 5, ..TrainConfig::default() };
        let d = build_dataset(&feats, NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(), train_end, &cfg).unwrap();
        let hp = LstmHyperparams { hidden_size: 4, minibatch_size: 8, ..LstmHyperparams::default() };
        train(&d, &hp, &cfg, 3).unwrap().model.params
    };
    assert_eq!(fit(&series), fit(&perturbed));

    let cutoff = NaiveDate::from_ymd_opt(2004, 6, 1).unwrap();
    for (a, b) in series.iter().zip(&perturbed) {
        let fa = AssetFrame::from_prices(a, 60).unwrap();
        let fb = AssetFrame::from_prices(b, 60).unwrap();
        let k = fa.range(NaiveDate::MIN, cutoff).end;
        for spec in [StrategySpec::LongOnly, StrategySpec::Moskowitz, StrategySpec::Intermediate { w: 0.5 }, StrategySpec::Macd] {
            let pa = classical_positions(&spec, &fa, &MacdParams::default());
            let pb = classical_positions(&spec, &fb, &MacdParams::default());
            assert_eq!(pa[..k], pb[..k], "{spec}");
        }
    }
}
