use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::evaluate;
use crate::sampling::{Sampler, SamplerSpec};
use crate::scalar::Scalar;
use crate::seeded_rng;

use super::{adam_step, class_balanced_loss, loss, AdamConfig, AdamState, Network, DEFAULT_HIDDEN};

/// Loss monitored on the validation set for early stopping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ValidationLoss {
    /// Cross-entropy averaged per class, then over classes.
    #[default]
    Balanced,
    /// Plain instance-mean cross-entropy.
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_epochs: usize,
    /// Epochs without validation improvement tolerated before stopping.
    pub patience: usize,
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub adam: AdamConfig,
    pub validation_loss: ValidationLoss,
    /// Seeds initialization and dropout masks.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 200,
            patience: 20,
            hidden: DEFAULT_HIDDEN.to_vec(),
            dropout: 0.1,
            adam: AdamConfig::default(),
            validation_loss: ValidationLoss::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 {
            return Err(Error::invalid("max_epochs must be positive"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::invalid("hidden widths must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid("dropout must lie in [0, 1)"));
        }
        self.adam.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
    /// NaN when the validation set lacks a class.
    pub validation_gmean: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were retained.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

fn validation_score<T: Scalar>(net: &Network<T>, val: &Dataset<T>, kind: ValidationLoss) -> Result<(f64, f64)> {
    let probs = net.predict(val.features())?;
    let l = match kind {
        ValidationLoss::Balanced => class_balanced_loss(&probs, val.labels())?,
        ValidationLoss::Mean => {
            let y = crate::Matrix::one_hot(val.labels(), val.n_classes());
            loss(&probs, &y, &vec![T::one(); val.len()])?
        }
    };
    let gm = evaluate(&probs, val.labels()).map_or(f64::NAN, |r| r.gmean.as_f64());
    Ok((l.as_f64(), gm))
}

/// Trains a fresh network on sampler batches with early stopping.
///
/// Each epoch runs [`Sampler::epoch_len`] Adam steps, then scores the
/// validation set. The parameters of the best validation epoch are returned.
/// Training stops after `patience + 1` consecutive epochs without strict
/// improvement, or at `max_epochs`.
pub fn train<T: Scalar>(
    train: &Dataset<T>,
    val: &Dataset<T>,
    spec: &SamplerSpec,
    cfg: &TrainConfig,
) -> Result<(Network<T>, History)> {
    cfg.validate()?;
    if train.n_features() != val.n_features() || train.n_classes() != val.n_classes() {
        return Err(Error::invalid("train and validation sets disagree on features or classes"));
    }
    if val.is_empty() {
        return Err(Error::invalid("validation set is empty"));
    }
    let mut dims = vec![train.n_features()];
    dims.extend_from_slice(&cfg.hidden);
    dims.push(train.n_classes());
    let mut net = Network::<T>::new(&dims, cfg.dropout, cfg.seed)?;
    let mut adam = AdamState::new(&net, cfg.adam)?;
    let mut sampler = Sampler::new(train, *spec)?;
    let mut dropout_rng = seeded_rng(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);

    let mut history = History::default();
    let mut best_loss = f64::INFINITY;
    let mut best_params = net.parameters();
    let mut stale = 0usize;
    let mut last_finite = None;

    for epoch in 0..cfg.max_epochs {
        let steps = sampler.epoch_len();
        let mut total = 0.0;
        for _ in 0..steps {
            let batch = sampler.next_batch()?;
            let (l, grads) =
                net.loss_and_gradients(batch.features(), batch.soft_labels(), batch.weights(), Some(&mut dropout_rng))?;
            if !l.is_finite() {
                return Err(Error::TrainingFailure { last_finite_epoch: last_finite });
            }
            total += l.as_f64();
            adam_step(&mut net, &grads, &mut adam)?;
            if !net.is_finite() {
                return Err(Error::TrainingFailure { last_finite_epoch: last_finite });
            }
        }
        let (val_loss, val_gm) = validation_score(&net, val, cfg.validation_loss)?;
        if !val_loss.is_finite() {
            return Err(Error::TrainingFailure { last_finite_epoch: last_finite });
        }
        last_finite = Some(epoch);
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: total / steps as f64,
            validation_loss: val_loss,
            validation_gmean: val_gm,
        });
        if val_loss < best_loss {
            best_loss = val_loss;
            best_params = net.parameters();
            history.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale > cfg.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    net.set_parameters(&best_params)?;
    Ok((net, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_two_gaussians, split, SplitPlan};
    use crate::sampling::Strategy;

    #[test]
    fn patience_zero_stops_after_first_stale_epoch() {
        let ds = make_two_gaussians::<f64>(150, 150, 2, 1.0, 3).unwrap();
        let s = &split(&ds, &SplitPlan::default()).unwrap()[0];
        let cfg = TrainConfig { max_epochs: 500, patience: 0, hidden: vec![8], ..TrainConfig::default() };
        let spec = SamplerSpec { strategy: Strategy::Baseline, batch_size: 16, ..SamplerSpec::default() };
        let (_, h) = train(&s.train, &s.validation, &spec, &cfg).unwrap();
        assert!(h.stopped_early);
        assert_eq!(h.epochs.len(), h.best_epoch + 2);
        let last = h.epochs.last().unwrap().validation_loss;
        assert!(last >= h.epochs[h.best_epoch].validation_loss);
    }

    #[test]
    fn rejects_mismatched_sets() {
        let a = make_two_gaussians::<f64>(20, 20, 2, 1.0, 3).unwrap();
        let b = make_two_gaussians::<f64>(20, 20, 3, 1.0, 3).unwrap();
        assert!(train(&a, &b, &SamplerSpec::default(), &TrainConfig::default()).is_err());
    }
}
