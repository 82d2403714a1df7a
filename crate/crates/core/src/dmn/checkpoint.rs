//! JSON model checkpoints.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::features::FeatureConfig;
use super::lstm::{Lstm, LstmHyperparams};
use super::train::TrainConfig;
use super::DmnError;

pub const CHECKPOINT_FORMAT: &str = "tsmom-cpd-lstm";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub input_size: usize,
    pub hidden_size: usize,
    pub hyperparams: LstmHyperparams,
    pub features: FeatureConfig,
    pub train: TrainConfig,
    pub sigma_tgt: f64,
    pub seed: u64,
    /// Training data span `[start, end)`.
    pub train_start: Option<NaiveDate>,
    pub train_end: Option<NaiveDate>,
    pub val_loss: Option<f64>,
    pub tensors: BTreeMap<String, Tensor>,
}

fn shapes(f: usize, h: usize) -> [(&'static str, Vec<usize>); 5] {
    [
        ("w_input", vec![4 * h, f]),
        ("w_recurrent", vec![4 * h, h]),
        ("bias", vec![4 * h]),
        ("w_head", vec![h]),
        ("b_head", vec![1]),
    ]
}

#[derive(Debug, Clone)]
pub struct CheckpointMeta {
    pub hyperparams: LstmHyperparams,
    pub features: FeatureConfig,
    pub train: TrainConfig,
    pub sigma_tgt: f64,
    pub seed: u64,
    pub train_start: Option<NaiveDate>,
    pub train_end: Option<NaiveDate>,
    pub val_loss: Option<f64>,
}

impl Checkpoint {
    pub fn new(model: &Lstm, meta: CheckpointMeta) -> Self {
        let dims = shapes(model.input_size, model.hidden_size);
        let tensors = model
            .tensors()
            .iter()
            .zip(dims)
            .map(|((name, data), (_, shape))| (name.to_string(), Tensor { shape, data: data.to_vec() }))
            .collect();
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            input_size: model.input_size,
            hidden_size: model.hidden_size,
            hyperparams: meta.hyperparams,
            features: meta.features,
            train: meta.train,
            sigma_tgt: meta.sigma_tgt,
            seed: meta.seed,
            train_start: meta.train_start,
            train_end: meta.train_end,
            val_loss: meta.val_loss.filter(|v| v.is_finite()),
            tensors,
        }
    }

    pub fn model(&self) -> Result<Lstm, DmnError> {
        let bad = |m: String| DmnError::Checkpoint(m);
        if self.format != CHECKPOINT_FORMAT {
            return Err(bad(format!("unknown format {:?}", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported version {}", self.version)));
        }
        if self.features.width() != self.input_size {
            return Err(bad(format!("feature width {} != input size {}", self.features.width(), self.input_size)));
        }
        let mut params = Vec::new();
        for (name, shape) in shapes(self.input_size, self.hidden_size) {
            let t = self.tensors.get(name).ok_or_else(|| bad(format!("missing tensor {name}")))?;
            if t.shape != shape || t.data.len() != shape.iter().product::<usize>() {
                return Err(bad(format!("tensor {name} has shape {:?}, expected {shape:?}", t.shape)));
            }
            params.extend_from_slice(&t.data);
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(bad("non-finite parameter".into()));
        }
        Lstm::from_params(self.input_size, self.hidden_size, params).ok_or_else(|| bad("parameter count".into()))
    }

    pub fn save(&self, path: &Path) -> Result<(), DmnError> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DmnError> {
        let text = std::fs::read_to_string(path)?;
        let ck: Self = serde_json::from_str(&text)?;
        ck.model()?;
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> CheckpointMeta {
        CheckpointMeta {
            hyperparams: LstmHyperparams::default(),
            features: FeatureConfig::default(),
            train: TrainConfig::default(),
            sigma_tgt: 0.15,
            seed: 42,
            train_start: NaiveDate::from_ymd_opt(1990, 1, 1),
            train_end: NaiveDate::from_ymd_opt(1995, 1, 1),
            val_loss: Some(-0.123456789012345),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let model = Lstm::new(8, 7, 3);
        let ck = Checkpoint::new(&model, meta());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.model().unwrap(), model);
        let x: Vec<f64> = (0..8 * 20).map(|i| (i as f64 * 0.37).sin()).collect();
        assert_eq!(back.model().unwrap().predict(&x), model.predict(&x));
    }

    #[test]
    fn rejects_corrupt_checkpoints() {
        let model = Lstm::new(8, 3, 3);
        let mut ck = Checkpoint::new(&model, meta());
        ck.tensors.get_mut("bias").unwrap().data.pop();
        assert!(matches!(ck.model(), Err(DmnError::Checkpoint(_))));
        let mut ck = Checkpoint::new(&model, meta());
        ck.version = 99;
        assert!(ck.model().is_err());
        let mut ck = Checkpoint::new(&model, meta());
        ck.features.cpd_lookback = Some(21);
        assert!(ck.model().is_err());
    }
}
