//! Experiment orchestration: cross-validated method comparisons over IR
//! levels, alpha sweeps, and CSV exporters.
//!
//! # Config file
//!
//! TOML, mirroring [`ExperimentConfig`]:
//!
//! ```toml
//! name = "ring"                 # dataset key used in result rows
//! seed = 42
//! minority_classes = [1]
//! irs = [0.05, 0.025, 0.01]
//! methods = ["baseline", "cost", "smote", "mixup", "remix"]
//! standardize = true            # z-score fitted on each training split
//! out_dir = "results/ring"
//! jobs = 1
//!
//! [dataset]                     # kind = ring | two_gaussians | gaussian_mixture | csv
//! kind = "ring"
//! n_major = 1000
//! n_minor = 1000
//! noise = 0.3
//!
//! [sampler]                     # defaults for every method
//! batch_size = 64
//! alpha = 0.1
//! k_neighbors = 5
//!
//! [overrides.mixup]             # optional per-method sampler overrides
//! alpha = 0.4
//!
//! [train]
//! max_epochs = 200
//! patience = 20
//! hidden = [64, 64, 32]
//! dropout = 0.1
//! validation_loss = "balanced"  # or "mean"
//! [train.adam]
//! step_size = 0.001
//! beta1 = 0.9
//! beta2 = 0.999
//! epsilon = 1e-8
//!
//! [split]
//! fold_count = 2
//! repetitions = 10
//! validation_fraction = 0.3
//! ```
//!
//! `train.seed` and the sampler seed are ignored: per-run seeds are derived
//! from `seed` and the run key (see [`run_seed`]).

mod experiment;
mod export;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{self, Dataset, LabelColumn};
use crate::error::{Error, Result};
use crate::network::TrainConfig;
use crate::sampling::{SamplerSpec, Strategy};
use crate::scalar::Scalar;

pub use experiment::{
    mean_and_std, run_experiment, sweep_alpha, Aggregate, FailedRun, RankSum, ResultTable, RunRow, Variant,
};
pub use export::{
    export_mixed_distribution, export_surface, silverman_bandwidth, Bandwidth, KdeTable, MixedDistribution,
    SurfaceGrid, KDE_GRID_POINTS,
};

/// Where the ground-truth data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Ring {
        n_major: usize,
        n_minor: usize,
        noise: f64,
    },
    TwoGaussians {
        n_major: usize,
        n_minor: usize,
        #[serde(default = "one")]
        dim: usize,
        separation: f64,
    },
    GaussianMixture {
        counts: Vec<usize>,
        #[serde(default = "two")]
        dim: usize,
        radius: f64,
        spread: f64,
    },
    Csv {
        path: PathBuf,
        /// Header name, or a 0-based column index written as digits.
        label_column: String,
        #[serde(default = "yes")]
        has_header: bool,
    },
}

fn one() -> usize {
    1
}

fn two() -> usize {
    2
}

fn yes() -> bool {
    true
}

impl DatasetSource {
    /// Materializes the dataset; generators use `seed`.
    pub fn load<T: Scalar>(&self, seed: u64) -> Result<Dataset<T>> {
        match self {
            DatasetSource::Ring { n_major, n_minor, noise } => data::make_ring(*n_major, *n_minor, *noise, seed),
            DatasetSource::TwoGaussians { n_major, n_minor, dim, separation } => {
                data::make_two_gaussians(*n_major, *n_minor, *dim, *separation, seed)
            }
            DatasetSource::GaussianMixture { counts, dim, radius, spread } => {
                data::make_gaussian_mixture(counts, *dim, *radius, *spread, seed)
            }
            DatasetSource::Csv { path, label_column, has_header } => {
                let col: LabelColumn = label_column.parse().unwrap();
                data::load_csv(path, &col, *has_header)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerDefaults {
    pub batch_size: usize,
    pub alpha: f64,
    pub k_neighbors: usize,
}

impl Default for SamplerDefaults {
    fn default() -> Self {
        let s = SamplerSpec::default();
        Self { batch_size: s.batch_size, alpha: s.alpha, k_neighbors: s.k_neighbors }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SamplerOverride {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_neighbors: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSettings {
    pub fold_count: usize,
    pub repetitions: usize,
    pub validation_fraction: f64,
}

impl Default for SplitSettings {
    fn default() -> Self {
        let p = data::SplitPlan::default();
        Self { fold_count: p.fold_count, repetitions: p.repetitions, validation_fraction: p.validation_fraction }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub dataset: DatasetSource,
    pub minority_classes: Vec<usize>,
    pub irs: Vec<f64>,
    pub methods: Vec<Strategy>,
    #[serde(default = "yes")]
    pub standardize: bool,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "one")]
    pub jobs: usize,
    #[serde(default)]
    pub sampler: SamplerDefaults,
    #[serde(default)]
    pub overrides: BTreeMap<Strategy, SamplerOverride>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub split: SplitSettings,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().replace('\n', " ")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks the config against itself and the loaded dataset.
    pub fn validate<T: Scalar>(&self, ds: &Dataset<T>) -> Result<()> {
        if self.irs.is_empty() || self.methods.is_empty() {
            return Err(Error::Config("irs and methods must be nonempty".into()));
        }
        if let Some(&c) = self.minority_classes.iter().find(|&&c| c >= ds.n_classes()) {
            return Err(Error::Config(format!("minority class {c} does not exist ({} classes)", ds.n_classes())));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        self.split_plan(0).validate()?;
        self.train.validate()?;
        for m in &self.methods {
            self.sampler_spec(*m, 0).validate(ds.n_classes())?;
        }
        Ok(())
    }

    pub fn split_plan(&self, seed: u64) -> data::SplitPlan {
        data::SplitPlan {
            fold_count: self.split.fold_count,
            repetitions: self.split.repetitions,
            validation_fraction: self.split.validation_fraction,
            seed,
        }
    }

    /// Sampler settings for `method` after applying its overrides.
    pub fn sampler_spec(&self, method: Strategy, seed: u64) -> SamplerSpec {
        let o = self.overrides.get(&method).copied().unwrap_or_default();
        SamplerSpec {
            strategy: method,
            batch_size: o.batch_size.unwrap_or(self.sampler.batch_size),
            alpha: o.alpha.unwrap_or(self.sampler.alpha),
            k_neighbors: o.k_neighbors.unwrap_or(self.sampler.k_neighbors),
            seed,
        }
    }
}

/// 64-bit FNV-1a, stable across platforms and toolchains.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seed of one training run: `seed ^ hash(dataset, IR, method, fold, repetition)`.
/// Alpha is not part of the key, so a sweep reuses the seeds of a plain run.
pub fn run_seed(seed: u64, dataset: &str, ir: f64, method: Strategy, fold: usize, repetition: usize) -> u64 {
    seed ^ fnv1a(format!("{dataset}|{ir}|{method}|{fold}|{repetition}").as_bytes())
}

/// Seed shared by every method at one IR level (imbalancing and splitting).
pub fn cell_seed(seed: u64, dataset: &str, ir: f64, purpose: &str) -> u64 {
    seed ^ fnv1a(format!("{dataset}|{ir}|{purpose}").as_bytes())
}
