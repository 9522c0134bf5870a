//! Training and evaluation workbench for small dense classifiers on
//! class-imbalanced data.
//!
//! The crate covers the full loop:
//!
//! - [`data`]: synthetic generators, CSV ingestion, IR-controlled
//!   downsampling and stratified repeated k-fold splits.
//! - [`sampling`]: mini-batch strategies (baseline, cost weighting,
//!   in-batch SMOTE, MixUp and ReMix, i.e. balanced resampling followed by
//!   convex mixing of features and labels).
//! - [`network`]: a ReLU MLP with dropout, soft-label cross-entropy,
//!   Adam and an early-stopping trainer.
//! - [`metrics`]: confusion matrix, g-mean, per-class and balanced Brier
//!   scores, gains and rank aggregation.
//! - [`harness`]: cross-validated method comparisons, alpha sweeps and
//!   CSV exporters for decision surfaces and mixed-sample densities.
//! - [`cli`]: the `remix` command-line front end.
//!
//! Every numeric type is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` / `*32` aliases below pin the common choices.

pub mod cli;
pub mod data;
pub mod error;
pub mod harness;
pub mod matrix;
pub mod metrics;
pub mod network;
pub mod sampling;
pub mod scalar;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use scalar::Scalar;

/// Deterministic random stream used throughout the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}

pub type Dataset64 = data::Dataset<f64>;
pub type Dataset32 = data::Dataset<f32>;
pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type Batch64 = sampling::Batch<f64>;
pub type Batch32 = sampling::Batch<f32>;
pub type Sampler64<'a> = sampling::Sampler<'a, f64>;
pub type Network64 = network::Network<f64>;
pub type Network32 = network::Network<f32>;
pub type MetricsReport64 = metrics::MetricsReport<f64>;
