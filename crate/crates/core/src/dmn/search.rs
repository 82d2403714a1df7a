//! Random hyperparameter search over a discrete grid.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lstm::LstmHyperparams;
use super::DmnError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub dropout: Vec<f64>,
    pub hidden_size: Vec<usize>,
    pub minibatch_size: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub max_grad_norm: Vec<f64>,
    /// Candidate changepoint lookbacks; empty when the model has no changepoint inputs.
    pub cpd_lookback: Vec<usize>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            dropout: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            hidden_size: vec![5, 10, 20, 40, 80, 160],
            minibatch_size: vec![64, 128, 256],
            learning_rate: vec![1e-4, 1e-3, 1e-2, 1e-1],
            max_grad_norm: vec![1e-2, 1.0, 100.0],
            cpd_lookback: Vec::new(),
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<(), DmnError> {
        let empty = [
            ("dropout", self.dropout.is_empty()),
            ("hidden_size", self.hidden_size.is_empty()),
            ("minibatch_size", self.minibatch_size.is_empty()),
            ("learning_rate", self.learning_rate.is_empty()),
            ("max_grad_norm", self.max_grad_norm.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(DmnError::InvalidHyperparams(format!("empty search dimension {name}")));
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.dropout.len()
            * self.hidden_size.len()
            * self.minibatch_size.len()
            * self.learning_rate.len()
            * self.max_grad_norm.len()
            * self.cpd_lookback.len().max(1)
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> LstmHyperparams {
        LstmHyperparams {
            dropout: *self.dropout.choose(rng).unwrap(),
            hidden_size: *self.hidden_size.choose(rng).unwrap(),
            minibatch_size: *self.minibatch_size.choose(rng).unwrap(),
            learning_rate: *self.learning_rate.choose(rng).unwrap(),
            max_grad_norm: *self.max_grad_norm.choose(rng).unwrap(),
            cpd_lookback: self.cpd_lookback.choose(rng).copied(),
        }
    }
}

/// One row of the search log. `val_loss` is `None` for failed trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub hyperparams: LstmHyperparams,
    pub val_loss: Option<f64>,
    pub error: Option<String>,
}

/// Draw `n` configurations uniformly with replacement, each with its own
/// training seed.
pub fn sample_trials(space: &SearchSpace, n: usize, seed: u64) -> Result<Vec<(LstmHyperparams, u64)>, DmnError> {
    space.validate()?;
    if n == 0 {
        return Err(DmnError::InvalidHyperparams("at least one search iteration is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| (space.draw(&mut rng), rng.random())).collect())
}

/// Run every sampled trial through `run`, which returns the validation
/// loss. Trials present in `completed` with identical settings are not
/// rerun. `on_trial` sees each record as it is produced. Fails when no
/// trial yields a finite loss.
pub fn random_search<F, G>(
    space: &SearchSpace,
    n: usize,
    seed: u64,
    completed: &[TrialRecord],
    mut run: F,
    mut on_trial: G,
) -> Result<Vec<TrialRecord>, DmnError>
where
    F: FnMut(usize, &LstmHyperparams, u64) -> Result<f64, DmnError>,
    G: FnMut(&TrialRecord) -> Result<(), DmnError>,
{
    let mut records = Vec::new();
    for (trial, (hp, s)) in sample_trials(space, n, seed)?.into_iter().enumerate() {
        if let Some(done) = completed.iter().find(|r| r.trial == trial && r.hyperparams == hp && r.seed == s) {
            records.push(done.clone());
            continue;
        }
        let rec = match run(trial, &hp, s) {
            Ok(v) if v.is_finite() => TrialRecord { trial, seed: s, hyperparams: hp, val_loss: Some(v), error: None },
            Ok(v) => TrialRecord {
                trial,
                seed: s,
                hyperparams: hp,
                val_loss: None,
                error: Some(format!("non-finite validation loss {v}")),
            },
            Err(e) => {
                log::warn!("trial {trial} failed: {e}");
                TrialRecord { trial, seed: s, hyperparams: hp, val_loss: None, error: Some(e.to_string()) }
            }
        };
        on_trial(&rec)?;
        records.push(rec);
    }
    if best_trial(&records).is_none() {
        let detail: Vec<String> = records
            .iter()
            .map(|r| format!("trial {}: {}", r.trial, r.error.as_deref().unwrap_or("non-finite loss")))
            .collect();
        return Err(DmnError::TrainingFailed(format!("all trials failed ({})", detail.join("; "))));
    }
    Ok(records)
}

/// Lowest validation loss; ties go to the earlier trial.
pub fn best_trial(records: &[TrialRecord]) -> Option<&TrialRecord> {
    records
        .iter()
        .filter(|r| r.val_loss.is_some_and(f64::is_finite))
        .fold(None, |best: Option<&TrialRecord>, r| match best {
            Some(b) if b.val_loss.unwrap() <= r.val_loss.unwrap() => Some(b),
            _ => Some(r),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_space() -> SearchSpace {
        SearchSpace {
            dropout: vec![0.1, 0.2],
            hidden_size: vec![5, 10],
            minibatch_size: vec![64],
            learning_rate: vec![1e-3],
            max_grad_norm: vec![1.0],
            cpd_lookback: vec![21, 63],
        }
    }

    #[test]
    fn sampling_is_seeded_and_uniform() {
        let s = small_space();
        let a = sample_trials(&s, 5, 3).unwrap();
        assert_eq!(a, sample_trials(&s, 5, 3).unwrap());
        assert_ne!(a, sample_trials(&s, 5, 4).unwrap());
        assert!(a.iter().all(|(h, _)| h.cpd_lookback.is_some()));
        assert!(sample_trials(&s, 0, 3).is_err());
        // with replacement: 800 draws over 8 cells, each cell near 100
        let many = sample_trials(&s, 800, 1).unwrap();
        for d in [0.1, 0.2] {
            for h in [5, 10] {
                for l in [21, 63] {
                    let k = many
                        .iter()
                        .filter(|(p, _)| p.dropout == d && p.hidden_size == h && p.cpd_lookback == Some(l))
                        .count();
                    assert!((60..140).contains(&k), "{k}");
                }
            }
        }
        let defaults = sample_trials(&SearchSpace::default(), 3, 0).unwrap();
        assert!(defaults.iter().all(|(h, _)| h.cpd_lookback.is_none()));
    }

    #[test]
    fn single_iteration_returns_that_trial() {
        let recs = random_search(&small_space(), 1, 5, &[], |_, _, _| Ok(0.5), |_| Ok(())).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(best_trial(&recs).unwrap().trial, 0);
    }

    #[test]
    fn all_failures_is_an_error() {
        let err = random_search(
            &small_space(),
            2,
            5,
            &[],
            |t, _, _| if t == 0 { Ok(f64::NAN) } else { Err(DmnError::NonFiniteGradient) },
            |_| Ok(()),
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("trial 0: non-finite validation loss") && msg.contains("trial 1: non-finite gradient"), "{msg}");
    }

    #[test]
    fn failures_are_logged_and_best_is_chosen() {
        let s = small_space();
        let mut seen = Vec::new();
        let recs = random_search(
            &s,
            4,
            1,
            &[],
            |t, _, _| if t == 1 { Err(DmnError::TrainingFailed("boom".into())) } else { Ok(-(t as f64)) },
            |r| {
                seen.push(r.trial);
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(seen, vec![0, 1, 2, 3]);
        assert!(recs[1].val_loss.is_none() && recs[1].error.as_deref().unwrap().contains("boom"));
        assert_eq!(best_trial(&recs).unwrap().trial, 3);
    }

    #[test]
    fn completed_trials_are_reused() {
        let s = small_space();
        let first = random_search(&s, 3, 9, &[], |t, _, _| Ok(t as f64), |_| Ok(())).unwrap();
        let mut calls = Vec::new();
        let second = random_search(
            &s,
            5,
            9,
            &first[..2],
            |t, _, _| {
                calls.push(t);
                Ok(10.0)
            },
            |_| Ok(()),
        )
        .unwrap();
        assert_eq!(calls, vec![2, 3, 4]);
        assert_eq!(second[..2], first[..2]);
    }

    #[test]
    fn ties_prefer_earlier_trial() {
        let hp = LstmHyperparams::default();
        let rec = |trial, v| TrialRecord { trial, seed: 0, hyperparams: hp, val_loss: v, error: None };
        let recs = [rec(0, None), rec(1, Some(-1.0)), rec(2, Some(-1.0)), rec(3, Some(f64::NAN))];
        assert_eq!(best_trial(&recs).unwrap().trial, 1);
        assert!(best_trial(&[rec(0, None)]).is_none());
    }
}
