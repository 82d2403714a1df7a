//! Daily strategy returns over a test span.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::windows::Window;
use super::BacktestError;
use crate::data::AssetFrame;
use crate::dmn::{AssetFeatures, Lstm};
use crate::strategies::{capture, classical_positions, MacdParams, StrategyReturns, StrategySpec};

pub struct StrategyInputs<'a> {
    /// Unwinsorized frames, used for positions of the classical strategies
    /// and for every captured return.
    pub frames: &'a [AssetFrame],
    pub macd: &'a MacdParams,
    pub sigma_tgt: f64,
}

/// A trained network with the feature rows it consumes.
pub struct LearnedModel<'a> {
    pub model: &'a Lstm,
    pub features: &'a [AssetFeatures],
    pub seq_len: usize,
}

/// Position from the last output over the `seq_len` feature rows ending at
/// frame index `i`; `None` without a full contiguous history.
pub fn lstm_position(model: &Lstm, feats: &AssetFeatures, i: usize, seq_len: usize) -> Option<f64> {
    let r = feats.row_of_frame_index(i)?;
    if r + 1 < seq_len || feats.index[r + 1 - seq_len] + seq_len - 1 != i {
        return None;
    }
    let inputs: Vec<f64> = feats.rows[r + 1 - seq_len..=r].iter().flat_map(|row| row.values()).collect();
    Some(model.predict_last(&inputs))
}

fn learned_positions(frame: &AssetFrame, m: &LearnedModel, window: &Window) -> Vec<Option<f64>> {
    let mut positions = vec![None; frame.len()];
    let Some(feats) = m.features.iter().find(|f| f.symbol == frame.symbol) else {
        return positions;
    };
    let range = frame.range(window.test_start, window.test_end);
    // position i earns the return at i + 1
    let lo = range.start.saturating_sub(1);
    let hi = range.end.saturating_sub(1);
    let values: Vec<Option<f64>> =
        (lo..hi).into_par_iter().map(|i| lstm_position(m.model, feats, i, m.seq_len)).collect();
    positions[lo..hi].copy_from_slice(&values);
    positions
}

pub fn run_strategy(
    spec: &StrategySpec,
    inputs: &StrategyInputs,
    window: &Window,
    learned: Option<&LearnedModel>,
) -> Result<StrategyReturns, BacktestError> {
    if spec.is_learned() && learned.is_none() {
        return Err(BacktestError::Untrained(spec.to_string()));
    }
    let per_asset: BTreeMap<String, _> = inputs
        .frames
        .par_iter()
        .map(|frame| {
            let positions = match learned {
                Some(m) if spec.is_learned() => learned_positions(frame, m, window),
                _ => classical_positions(spec, frame, inputs.macd),
            };
            let days = capture(frame, &positions, inputs.sigma_tgt, window.test_start, window.test_end);
            (frame.symbol.clone(), days)
        })
        .filter(|(_, days)| !days.is_empty())
        .collect();
    Ok(StrategyReturns::from_assets(per_asset))
}

/// Join consecutive windows into one stream.
pub fn concat(parts: &[StrategyReturns]) -> StrategyReturns {
    let mut per_asset: BTreeMap<String, Vec<_>> = BTreeMap::new();
    for p in parts {
        for (s, days) in &p.per_asset {
            per_asset.entry(s.clone()).or_default().extend_from_slice(days);
        }
    }
    for days in per_asset.values_mut() {
        days.sort_by_key(|d| d.date);
    }
    StrategyReturns::from_assets(per_asset)
}
