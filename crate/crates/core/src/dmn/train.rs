//! Sequence batching and the training loop with early stopping.

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::AssetFeatures;
use super::lstm::{DropoutMasks, Lstm, LstmHyperparams};
use super::{sharpe_loss, sharpe_loss_grad, Adam, DmnError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seq_len: usize,
    /// Chronological fraction of each asset's rows used for fitting.
    pub train_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 300, patience: 25, seq_len: 63, train_fraction: 0.9 }
    }
}

/// A run of consecutive feature rows of one asset.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub symbol: String,
    /// `steps x F`, row-major.
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
}

impl Sequence {
    pub fn steps(&self) -> usize {
        self.targets.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub input_size: usize,
    pub train: Vec<Sequence>,
    pub valid: Vec<Sequence>,
}

fn chunk(symbol: &str, feats: &AssetFeatures, rows: &[usize], seq_len: usize, out: &mut Vec<Sequence>) {
    // break on gaps in the frame index, then into non-overlapping chunks
    let mut start = 0;
    for k in 1..=rows.len() {
        let gap = k == rows.len() || feats.index[rows[k]] != feats.index[rows[k - 1]] + 1;
        if !gap {
            continue;
        }
        for piece in rows[start..k].chunks(seq_len) {
            out.push(Sequence {
                symbol: symbol.to_string(),
                inputs: piece.iter().flat_map(|&r| feats.rows[r].values()).collect(),
                targets: piece.iter().map(|&r| feats.targets[r].expect("row with target")).collect(),
            });
        }
        start = k;
    }
}

/// Rows dated on or after `start` whose target return falls before `end`,
/// split chronologically per asset into fitting and validation sequences.
/// Assets whose validation span cannot hold one full sequence are left out.
pub fn build_dataset(
    features: &[AssetFeatures],
    start: NaiveDate,
    end: NaiveDate,
    cfg: &TrainConfig,
) -> Result<Dataset, DmnError> {
    let mut input_size = None;
    let mut train = Vec::new();
    let mut valid = Vec::new();
    for feats in features {
        let rows: Vec<usize> = (0..feats.rows.len())
            .filter(|&r| feats.rows[r].date >= start && feats.target_dates[r].is_some_and(|d| d < end))
            .collect();
        if rows.is_empty() {
            continue;
        }
        let width = feats.rows[rows[0]].values().count();
        if *input_size.get_or_insert(width) != width {
            return Err(DmnError::InsufficientData(format!("{} has {width} features", feats.symbol)));
        }
        let cut = ((rows.len() as f64) * cfg.train_fraction).floor() as usize;
        if rows.len() - cut < cfg.seq_len {
            log::info!("{}: validation span shorter than one sequence; excluded", feats.symbol);
            continue;
        }
        chunk(&feats.symbol, feats, &rows[..cut], cfg.seq_len, &mut train);
        chunk(&feats.symbol, feats, &rows[cut..], cfg.seq_len, &mut valid);
    }
    let input_size = input_size.ok_or_else(|| DmnError::InsufficientData(format!("no rows in [{start}, {end})")))?;
    if train.is_empty() || valid.is_empty() {
        return Err(DmnError::InsufficientData(format!(
            "{} fitting and {} validation sequences in [{start}, {end})",
            train.len(),
            valid.len()
        )));
    }
    Ok(Dataset { input_size, train, valid })
}

/// Loss over all steps of all sequences, without dropout.
pub fn evaluate(model: &Lstm, seqs: &[Sequence]) -> Result<f64, DmnError> {
    let positions: Vec<Vec<f64>> = seqs.par_iter().map(|s| model.predict(&s.inputs)).collect();
    let x: Vec<f64> = positions.into_iter().flatten().collect();
    let y: Vec<f64> = seqs.iter().flat_map(|s| s.targets.iter().copied()).collect();
    sharpe_loss(&x, &y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean minibatch loss; NaN when every batch was skipped.
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: Lstm,
    pub val_loss: f64,
    pub initial_val_loss: f64,
    pub best_epoch: usize,
    pub history: Vec<EpochLog>,
}

/// One training run. Deterministic for a given seed regardless of the
/// number of worker threads.
pub fn train(data: &Dataset, hp: &LstmHyperparams, cfg: &TrainConfig, seed: u64) -> Result<TrainOutcome, DmnError> {
    if hp.hidden_size == 0 || hp.minibatch_size == 0 || !(0.0..1.0).contains(&hp.dropout) {
        return Err(DmnError::InvalidHyperparams(format!("{hp:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Lstm::new(data.input_size, hp.hidden_size, rng.random());
    let mut adam = Adam::new(model.params.len());
    let initial_val_loss = evaluate(&model, &data.valid).unwrap_or(f64::NAN);
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..data.train.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut batch_losses = Vec::new();
        for batch in order.chunks(hp.minibatch_size) {
            let seeds: Vec<u64> = batch.iter().map(|_| rng.random()).collect();
            let traces: Vec<_> = batch
                .par_iter()
                .zip(&seeds)
                .map(|(&k, &s)| {
                    let seq = &data.train[k];
                    let masks = (hp.dropout > 0.0).then(|| {
                        let mut r = ChaCha8Rng::seed_from_u64(s);
                        DropoutMasks::sample(&mut r, hp.dropout, data.input_size, hp.hidden_size, seq.steps())
                    });
                    model.forward(&seq.inputs, masks.as_ref())
                })
                .collect();
            let x: Vec<f64> = traces.iter().flat_map(|t| t.positions.iter().copied()).collect();
            let y: Vec<f64> = batch.iter().flat_map(|&k| data.train[k].targets.iter().copied()).collect();
            let (loss, d_pos) = match sharpe_loss_grad(&x, &y) {
                Ok(v) => v,
                Err(e) => {
                    log::debug!("epoch {epoch}: skipping batch: {e}");
                    continue;
                }
            };
            let mut offsets = Vec::with_capacity(traces.len());
            let mut at = 0;
            for t in &traces {
                offsets.push(at);
                at += t.positions.len();
            }
            let grads: Vec<Vec<f64>> = traces
                .par_iter()
                .zip(&offsets)
                .map(|(t, &o)| model.backward(t, &d_pos[o..o + t.positions.len()]))
                .collect();
            let mut g = vec![0.0; model.params.len()];
            for part in &grads {
                for (a, b) in g.iter_mut().zip(part) {
                    *a += b;
                }
            }
            if let Err(e) = adam.step(&mut model.params, &mut g, hp.learning_rate, hp.max_grad_norm) {
                log::warn!("epoch {epoch}: {e}; aborting epoch");
                break;
            }
            batch_losses.push(loss);
        }
        let train_loss = if batch_losses.is_empty() {
            f64::NAN
        } else {
            batch_losses.iter().sum::<f64>() / batch_losses.len() as f64
        };
        let val_loss = match evaluate(&model, &data.valid) {
            Ok(v) if v.is_finite() && model.params.iter().all(|p| p.is_finite()) => v,
            _ => f64::NAN,
        };
        history.push(EpochLog { epoch, train_loss, val_loss });
        log::debug!("epoch {epoch}: train {train_loss:.4} valid {val_loss:.4}");
        if val_loss.is_finite() && best.as_ref().is_none_or(|(b, _, _)| val_loss < *b) {
            best = Some((val_loss, epoch, model.params.clone()));
        }
        let since = epoch - best.as_ref().map_or(0, |(_, e, _)| *e);
        if since >= cfg.patience {
            break;
        }
        if model.params.iter().any(|p| !p.is_finite()) {
            break;
        }
    }
    let (val_loss, best_epoch, params) =
        best.ok_or_else(|| DmnError::TrainingFailed("no epoch produced a finite validation loss".into()))?;
    model.params = params;
    Ok(TrainOutcome { model, val_loss, initial_val_loss, best_epoch, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{regime_universe, AssetFrame};
    use crate::dmn::{build_features, FeatureConfig};

    pub(crate) fn toy_features() -> Vec<AssetFeatures> {
        let start = NaiveDate::from_ymd_opt(2000, 1, 3).unwrap();
        let prices = regime_universe(2, 1100, 100, 0.002, 0.01, false, start, 4).generate().unwrap();
        prices
            .iter()
            .map(|p| {
                let f = AssetFrame::from_prices(p, 60).unwrap();
                build_features(&f, &FeatureConfig::default(), None, 0.15).unwrap()
            })
            .collect()
    }

    #[test]
    fn dataset_respects_window_and_split() {
        let feats = toy_features();
        let start = feats[0].rows[0].date;
        let end = feats[0].rows[700].date;
        let cfg = TrainConfig::default();
        let d = build_dataset(&feats, start, end, &cfg).unwrap();
        assert_eq!(d.input_size, 8);
        let n_train: usize = d.train.iter().map(|s| s.steps()).sum();
        let n_valid: usize = d.valid.iter().map(|s| s.steps()).sum();
        // rows 0..699 have targets dated before `end`
        assert_eq!(n_train + n_valid, 2 * 699);
        assert_eq!(n_train, 2 * 629);
        assert!(d.train.iter().all(|s| s.steps() <= 63 && s.inputs.len() == 8 * s.steps()));
        assert_eq!(d.train.iter().filter(|s| s.steps() == 63).count(), 2 * 9);
        // last validation target is the return on the day before `end`
        let last = d.valid.iter().rfind(|s| s.symbol == feats[0].symbol).unwrap();
        assert_eq!(*last.targets.last().unwrap(), feats[0].targets[698].unwrap());
        // a window whose validation tail is shorter than a sequence has no assets
        let short = feats[0].rows[400].date;
        assert!(matches!(build_dataset(&feats, start, short, &cfg), Err(DmnError::InsufficientData(_))));
    }

    #[test]
    fn training_reduces_validation_loss_and_is_deterministic() {
        let feats = toy_features();
        let start = feats[0].rows[0].date;
        let end = *feats[0].target_dates.iter().rev().flatten().next().unwrap();
        let cfg = TrainConfig { epochs: 40, patience: 10, ..TrainConfig::default() };
        let data = build_dataset(&feats, start, end, &cfg).unwrap();
        let hp = LstmHyperparams { hidden_size: 8, minibatch_size: 4, learning_rate: 1e-2, dropout: 0.1, ..Default::default() };
        let a = train(&data, &hp, &cfg, 7).unwrap();
        assert!(a.val_loss < a.initial_val_loss, "{} vs {}", a.val_loss, a.initial_val_loss);
        assert_eq!(evaluate(&a.model, &data.valid).unwrap(), a.val_loss);
        let b = train(&data, &hp, &cfg, 7).unwrap();
        assert_eq!(a.model.params, b.model.params);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| train(&data, &hp, &cfg, 7)).unwrap();
        assert_eq!(a.model.params, c.model.params);
    }

    #[test]
    fn early_stopping_honours_patience() {
        let feats = toy_features();
        let start = feats[0].rows[0].date;
        let end = *feats[0].target_dates.iter().rev().flatten().next().unwrap();
        let cfg = TrainConfig { epochs: 200, patience: 3, ..TrainConfig::default() };
        let data = build_dataset(&feats, start, end, &cfg).unwrap();
        // a huge learning rate overshoots quickly
        let hp = LstmHyperparams { hidden_size: 4, minibatch_size: 64, learning_rate: 0.5, dropout: 0.0, ..Default::default() };
        let out = train(&data, &hp, &cfg, 1).unwrap();
        let last = out.history.last().unwrap().epoch;
        assert!(last < 200);
        assert_eq!(last - out.best_epoch, 3);
        let best = out.history.iter().filter(|h| h.val_loss.is_finite()).map(|h| h.val_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(best, out.val_loss);
    }

    #[test]
    fn invalid_hyperparams_are_rejected() {
        let feats = toy_features();
        let start = feats[0].rows[0].date;
        let end = *feats[0].target_dates.iter().rev().flatten().next().unwrap();
        let data = build_dataset(&feats, start, end, &TrainConfig::default()).unwrap();
        let hp = LstmHyperparams { dropout: 1.0, ..Default::default() };
        assert!(matches!(train(&data, &hp, &TrainConfig::default(), 0), Err(DmnError::InvalidHyperparams(_))));
    }
}
