//! Mini-batch strategies for imbalanced training.
//!
//! A [`Sampler`] walks shuffled epochs of a training set and turns each
//! consecutive slice into a [`Batch`] according to its [`Strategy`]:
//!
//! | strategy   | batch                                                          |
//! |------------|----------------------------------------------------------------|
//! | `baseline` | the slice with one-hot labels                                  |
//! | `cost`     | the slice, instance weights `N / (C * N_c)`                    |
//! | `smote`    | in-batch SMOTE up to, and undersampling down to, `⌊B/C⌋`/class |
//! | `mixup`    | the slice mixed with a permutation of itself, one λ per batch  |
//! | `remix`    | `⌊B/C⌋` rows/class resampled with replacement, then mixed      |
//!
//! Classes missing from a slice are served from a per-class reservoir over
//! the training set, so balanced strategies always see every class.

mod beta;
mod resample;
mod smote;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::{seeded_rng, Rng};

pub use beta::{ln_gamma_draw, sample_beta};
pub use resample::{balanced_resample, mix, resample_rows, ClassReservoir};
pub use smote::{interpolate, nearest_neighbours, Synthetic};

/// Row-stochastic tolerance for soft labels.
pub const LABEL_SUM_TOL: f64 = 1e-9;

/// Training mini-batch: features, soft labels and per-instance loss weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    features: Matrix<T>,
    soft_labels: Matrix<T>,
    weights: Vec<T>,
}

impl<T: Scalar> Batch<T> {
    pub fn new(features: Matrix<T>, soft_labels: Matrix<T>, weights: Vec<T>) -> Result<Self> {
        let b = features.rows();
        if b == 0 {
            return Err(Error::invalid("batch must contain at least one row"));
        }
        if soft_labels.rows() != b || weights.len() != b {
            return Err(Error::invalid("batch components disagree on row count"));
        }
        if !features.is_finite() {
            return Err(Error::invalid("batch features contain NaN or infinite values"));
        }
        let tol = T::lit(LABEL_SUM_TOL);
        for row in soft_labels.iter_rows() {
            if row.iter().any(|&p| !(p >= T::zero() && p <= T::one())) {
                return Err(Error::invalid("soft label entry outside [0, 1]"));
            }
            let s: T = row.iter().copied().sum();
            if (s - T::one()).abs() > tol {
                return Err(Error::invalid(format!("soft label row sums to {s}")));
            }
        }
        if weights.iter().any(|&w| w.is_nan() || w <= T::zero() || !w.is_finite()) {
            return Err(Error::invalid("batch weights must be positive and finite"));
        }
        Ok(Self { features, soft_labels, weights })
    }

    pub fn features(&self) -> &Matrix<T> {
        &self.features
    }

    pub fn soft_labels(&self) -> &Matrix<T> {
        &self.soft_labels
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Baseline,
    Cost,
    Smote,
    Mixup,
    Remix,
}

impl Strategy {
    pub const ALL: [Strategy; 5] =
        [Strategy::Baseline, Strategy::Cost, Strategy::Smote, Strategy::Mixup, Strategy::Remix];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Baseline => "baseline",
            Strategy::Cost => "cost",
            Strategy::Smote => "smote",
            Strategy::Mixup => "mixup",
            Strategy::Remix => "remix",
        }
    }

    /// Strategies whose batches hold exactly `⌊B/C⌋` rows per class.
    pub fn is_balanced(self) -> bool {
        matches!(self, Strategy::Smote | Strategy::Remix)
    }

    pub fn uses_alpha(self) -> bool {
        matches!(self, Strategy::Mixup | Strategy::Remix)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL.into_iter().find(|m| m.name() == s.to_ascii_lowercase()).ok_or_else(|| {
            Error::invalid(format!("unknown strategy {s:?} (expected baseline, cost, smote, mixup or remix)"))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub strategy: Strategy,
    pub batch_size: usize,
    pub alpha: f64,
    pub k_neighbors: usize,
    pub seed: u64,
}

impl Default for SamplerSpec {
    fn default() -> Self {
        Self { strategy: Strategy::Baseline, batch_size: 64, alpha: 0.1, k_neighbors: 5, seed: 0 }
    }
}

impl SamplerSpec {
    pub fn validate(&self, n_classes: usize) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        if self.alpha.is_nan() || self.alpha < 0.0 || self.alpha.is_infinite() {
            return Err(Error::invalid(format!("alpha {} must be finite and >= 0", self.alpha)));
        }
        if self.k_neighbors == 0 {
            return Err(Error::invalid("k_neighbors must be at least 1"));
        }
        if self.strategy.is_balanced() && self.batch_size < n_classes {
            return Err(Error::invalid(format!(
                "batch_size {} is smaller than the class count {n_classes}",
                self.batch_size
            )));
        }
        Ok(())
    }
}

/// Inverse-frequency class weights `w_c = N / (C * N_c)`, so that
/// `Σ_c w_c N_c = N`.
pub fn cost_weights<T: Scalar>(ds: &Dataset<T>) -> Result<Vec<T>> {
    let counts = ds.class_counts();
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::invalid(format!("class {c} has no instances")));
    }
    let n = T::from_count(ds.len());
    let k = T::from_count(ds.n_classes());
    Ok(counts.iter().map(|&nc| n / (k * T::from_count(nc))).collect())
}

/// Construction details of one emitted batch, for inspection and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchTrace<T> {
    /// Training-set rows of the underlying epoch slice.
    pub slice_rows: Vec<usize>,
    /// Hard class of each pre-mix row (balanced and baseline alike).
    pub pre_mix_labels: Vec<usize>,
    pub lambda: Option<T>,
    pub permutation: Option<Vec<usize>>,
    pub synthetics: Vec<Synthetic<T>>,
}

impl<T> BatchTrace<T> {
    pub fn pre_mix_class_counts(&self, n_classes: usize) -> Vec<usize> {
        let mut counts = vec![0; n_classes];
        for &y in &self.pre_mix_labels {
            counts[y] += 1;
        }
        counts
    }
}

/// Stateful batch stream over one training set. Single-threaded; build one
/// per training run.
pub struct Sampler<'a, T> {
    ds: &'a Dataset<T>,
    spec: SamplerSpec,
    rng: Rng,
    order: Vec<usize>,
    cursor: usize,
    reservoir: ClassReservoir,
    class_weights: Vec<T>,
}

impl<'a, T: Scalar> Sampler<'a, T> {
    pub fn new(ds: &'a Dataset<T>, spec: SamplerSpec) -> Result<Self> {
        if ds.is_empty() {
            return Err(Error::invalid("cannot sample from an empty dataset"));
        }
        spec.validate(ds.n_classes())?;
        let mut rng = seeded_rng(spec.seed);
        let reservoir = ClassReservoir::from_dataset(ds, &mut rng)?;
        let class_weights = cost_weights(ds)?;
        let mut order: Vec<usize> = (0..ds.len()).collect();
        order.shuffle(&mut rng);
        Ok(Self { ds, spec, rng, order, cursor: 0, reservoir, class_weights })
    }

    pub fn spec(&self) -> &SamplerSpec {
        &self.spec
    }

    /// Batches per pass over the training set.
    pub fn epoch_len(&self) -> usize {
        self.ds.len().div_ceil(self.spec.batch_size)
    }

    /// Balanced per-class target `⌊B/C⌋`.
    pub fn per_class(&self) -> usize {
        self.spec.batch_size / self.ds.n_classes()
    }

    pub fn class_weights(&self) -> &[T] {
        &self.class_weights
    }

    /// Next consecutive slice of the shuffled epoch order; the last slice of
    /// an epoch may be short. A new shuffle starts once the order is used up.
    fn next_slice(&mut self) -> Vec<usize> {
        if self.cursor >= self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let end = (self.cursor + self.spec.batch_size).min(self.order.len());
        let slice = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        slice
    }

    fn hard_batch(&self, rows: &[usize], weights: Vec<T>) -> Result<Batch<T>> {
        let labels: Vec<usize> = rows.iter().map(|&r| self.ds.labels()[r]).collect();
        Batch::new(self.ds.features().select_rows(rows), Matrix::one_hot(&labels, self.ds.n_classes()), weights)
    }

    fn labels_of(&self, rows: &[usize]) -> Vec<usize> {
        rows.iter().map(|&r| self.ds.labels()[r]).collect()
    }

    fn trace(&self, slice: Vec<usize>, pre_mix_labels: Vec<usize>) -> BatchTrace<T> {
        BatchTrace { slice_rows: slice, pre_mix_labels, lambda: None, permutation: None, synthetics: Vec::new() }
    }

    pub fn baseline_batch(&mut self) -> Result<(Batch<T>, BatchTrace<T>)> {
        let slice = self.next_slice();
        let batch = self.hard_batch(&slice, vec![T::one(); slice.len()])?;
        let labels = self.labels_of(&slice);
        Ok((batch, self.trace(slice, labels)))
    }

    pub fn cost_batch(&mut self) -> Result<(Batch<T>, BatchTrace<T>)> {
        let slice = self.next_slice();
        let labels = self.labels_of(&slice);
        let weights = labels.iter().map(|&y| self.class_weights[y]).collect();
        let batch = self.hard_batch(&slice, weights)?;
        Ok((batch, self.trace(slice, labels)))
    }

    fn mixed(&mut self, rows: &[usize], trace: &mut BatchTrace<T>) -> Result<Batch<T>> {
        let x = self.ds.features().select_rows(rows);
        let y = Matrix::one_hot(&self.labels_of(rows), self.ds.n_classes());
        let mut perm: Vec<usize> = (0..rows.len()).collect();
        // alpha = 0 never mixes; skipping the shuffle keeps the stream equal
        // to the unmixed one
        if self.spec.alpha > 0.0 {
            perm.shuffle(&mut self.rng);
        }
        let lambda: T = sample_beta(self.spec.alpha, &mut self.rng)?;
        let batch = mix(&x, &y, lambda, &perm)?;
        trace.lambda = Some(lambda);
        trace.permutation = Some(perm);
        Ok(batch)
    }

    pub fn mixup_batch(&mut self) -> Result<(Batch<T>, BatchTrace<T>)> {
        let slice = self.next_slice();
        let labels = self.labels_of(&slice);
        let mut trace = self.trace(slice.clone(), labels);
        let batch = self.mixed(&slice, &mut trace)?;
        Ok((batch, trace))
    }

    pub fn remix_batch(&mut self) -> Result<(Batch<T>, BatchTrace<T>)> {
        let slice = self.next_slice();
        let balanced = resample_rows(
            &slice,
            self.ds.labels(),
            self.ds.n_classes(),
            self.per_class(),
            &mut self.reservoir,
            &mut self.rng,
        )?;
        let labels = self.labels_of(&balanced);
        let mut trace = self.trace(slice, labels);
        let batch = self.mixed(&balanced, &mut trace)?;
        Ok((batch, trace))
    }

    pub fn smote_batch(&mut self) -> Result<(Batch<T>, BatchTrace<T>)> {
        let slice = self.next_slice();
        let out = smote::smote_rows(
            self.ds,
            &slice,
            self.per_class(),
            self.spec.k_neighbors,
            &mut self.reservoir,
            &mut self.rng,
        )?;
        let n = out.labels.len();
        let batch = Batch::new(
            Matrix::from_vec(n, self.ds.n_features(), out.features)?,
            Matrix::one_hot(&out.labels, self.ds.n_classes()),
            vec![T::one(); n],
        )?;
        let mut trace = self.trace(slice, out.labels);
        trace.synthetics = out.synthetics;
        Ok((batch, trace))
    }

    /// Next batch together with its construction trace.
    pub fn next_traced(&mut self) -> Result<(Batch<T>, BatchTrace<T>)> {
        match self.spec.strategy {
            Strategy::Baseline => self.baseline_batch(),
            Strategy::Cost => self.cost_batch(),
            Strategy::Smote => self.smote_batch(),
            Strategy::Mixup => self.mixup_batch(),
            Strategy::Remix => self.remix_batch(),
        }
    }

    pub fn next_batch(&mut self) -> Result<Batch<T>> {
        self.next_traced().map(|(b, _)| b)
    }
}
