//! `remix` command-line interface.
//!
//! Every subcommand prints its fully resolved configuration (TOML, defaults
//! included) to stdout before doing any work. Flags override config-file
//! values. Failures print one line `error: <kind>: <message>` to stderr and
//! exit with status 1; malformed command lines print usage and exit with 2.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::data::{self, Dataset, LabelColumn, Standardizer};
use crate::error::{Error, Result};
use crate::harness::{self, Bandwidth, ExperimentConfig};
use crate::metrics::{evaluate, MetricsReport};
use crate::network::{self, Checkpoint, TrainConfig, ValidationLoss};
use crate::sampling::{SamplerSpec, Strategy};

#[derive(Debug, Parser)]
#[command(name = "remix", version, about = "Imbalanced-classification workbench for small dense networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset, optionally imbalanced, as CSV.
    Gen(GenArgs),
    /// Train a network on a CSV dataset and write a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a CSV dataset.
    Eval(EvalArgs),
    /// Cross-validated alpha sweep of remix from a config file.
    Sweep(SweepArgs),
    /// Export the decision surface of a checkpoint over 2-D data.
    Surface(SurfaceArgs),
    /// Export kernel densities of mixed features and labels for 1-D data.
    Kde(KdeArgs),
    /// Cross-validated method comparison from a config file.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum GenKind {
    Ring,
    TwoGaussians,
    Mixture,
}

#[derive(Debug, Args, Serialize)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "ring")]
    kind: GenKind,
    /// Rows of each majority class (ring, two-gaussians).
    #[arg(long, default_value_t = 1000)]
    n_major: usize,
    /// Rows of the minority class before imbalancing (ring, two-gaussians).
    #[arg(long, default_value_t = 1000)]
    n_minor: usize,
    /// Per-class row counts (mixture).
    #[arg(long, value_delimiter = ',', default_value = "1000,1000,1000,1000")]
    counts: Vec<usize>,
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long, default_value_t = 2.0)]
    separation: f64,
    #[arg(long, default_value_t = 3.0)]
    radius: f64,
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    /// Target imbalance ratio (total minority / total majority).
    #[arg(long)]
    ir: Option<f64>,
    /// Minority classes used with --ir.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    minority: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize, Clone)]
struct CsvArgs {
    #[arg(long)]
    data: PathBuf,
    /// Header name or 0-based index of the label column.
    #[arg(long, default_value = "label")]
    label_column: String,
    /// The file has no header row.
    #[arg(long)]
    no_header: bool,
}

impl CsvArgs {
    fn column(&self) -> LabelColumn {
        self.label_column.parse().unwrap()
    }

    fn load(&self) -> Result<Dataset<f64>> {
        data::load_csv(&self.data, &self.column(), !self.no_header)
    }

    fn load_with_classes(&self, classes: &[String]) -> Result<Dataset<f64>> {
        data::load_csv_with_classes(&self.data, &self.column(), !self.no_header, classes)
    }
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    csv: CsvArgs,
    #[arg(long, default_value = "remix")]
    strategy: String,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 5)]
    k_neighbors: usize,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 20)]
    patience: usize,
    #[arg(long, value_delimiter = ',', default_value = "64,64,32")]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    dropout: f64,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0.3)]
    validation_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fit a z-score transform on the training rows and store it in the checkpoint.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", default_value = "true")]
    standardize: bool,
    /// Checkpoint path.
    #[arg(long)]
    out: PathBuf,
    /// Optional per-epoch history CSV.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct EvalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    csv: CsvArgs,
    #[arg(long)]
    model: PathBuf,
    /// Optional CSV file receiving one metrics row.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Comma-separated IR list replacing the config's.
    #[arg(long, value_delimiter = ',')]
    ir: Option<Vec<f64>>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    standardize: Option<bool>,
    /// Comma-separated methods replacing the config's.
    #[arg(long, value_delimiter = ',')]
    strategy: Option<Vec<String>>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    k_neighbors: Option<usize>,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::from_file(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(j) = self.jobs {
            cfg.jobs = j;
        }
        if let Some(d) = &self.out_dir {
            cfg.out_dir = d.clone();
        }
        if let Some(irs) = &self.ir {
            cfg.irs = irs.clone();
        }
        if let Some(z) = self.standardize {
            cfg.standardize = z;
        }
        if let Some(methods) = &self.strategy {
            cfg.methods = methods.iter().map(|m| m.parse()).collect::<Result<_>>()?;
        }
        if let Some(a) = self.alpha {
            cfg.sampler.alpha = a;
        }
        if let Some(b) = self.batch_size {
            cfg.sampler.batch_size = b;
        }
        if let Some(k) = self.k_neighbors {
            cfg.sampler.k_neighbors = k;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Comma-separated alpha values for remix.
    #[arg(long, value_delimiter = ',', required = true)]
    alphas: Vec<f64>,
}

#[derive(Debug, Args, Serialize)]
struct SurfaceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    csv: CsvArgs,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 100)]
    resolution: usize,
    #[arg(long, default_value_t = 0.5)]
    margin: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct KdeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    csv: CsvArgs,
    #[arg(long, default_value = "remix")]
    strategy: String,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 5)]
    k_neighbors: usize,
    #[arg(long, default_value_t = 1000)]
    n_batches: usize,
    /// "auto" (Silverman) or a positive bandwidth.
    #[arg(long, default_value = "auto")]
    bandwidth: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Receives kde_features.csv and kde_labels.csv.
    #[arg(long)]
    out_dir: PathBuf,
}

fn print_resolved<S: Serialize>(command: &str, value: &S) {
    let body = toml::to_string(value).unwrap_or_else(|e| format!("# unprintable: {e}\n"));
    println!("# remix {command}: resolved configuration\n{body}");
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    print_resolved("gen", a);
    let mut ds: Dataset<f64> = match a.kind {
        GenKind::Ring => data::make_ring(a.n_major, a.n_minor, a.noise, a.seed)?,
        GenKind::TwoGaussians => data::make_two_gaussians(a.n_major, a.n_minor, a.dim, a.separation, a.seed)?,
        GenKind::Mixture => data::make_gaussian_mixture(&a.counts, a.dim.max(2), a.radius, a.spread, a.seed)?,
    };
    if let Some(ir) = a.ir {
        ds = data::imbalance(&ds, &a.minority, ir, a.seed ^ 0x1f)?;
    }
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    ds.write_csv(&a.out)?;
    println!("wrote {} rows, class counts {:?} to {}", ds.len(), ds.class_counts(), a.out.display());
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    print_resolved("train", a);
    let strategy: Strategy = a.strategy.parse()?;
    let ds = a.csv.load()?;
    if !(a.validation_fraction > 0.0 && a.validation_fraction < 1.0) {
        return Err(Error::invalid(format!("validation fraction must lie in (0, 1), got {}", a.validation_fraction)));
    }
    let holdout = holdout_indices(ds.labels(), ds.n_classes(), a.validation_fraction, a.seed);
    let (mut tr, mut va) = (ds.subset(&holdout.0)?, ds.subset(&holdout.1)?);
    let scaler = a.standardize.then(|| Standardizer::fit(tr.features()));
    if let Some(z) = &scaler {
        tr = z.apply(&tr)?;
        va = z.apply(&va)?;
    }
    let spec =
        SamplerSpec { strategy, batch_size: a.batch_size, alpha: a.alpha, k_neighbors: a.k_neighbors, seed: a.seed };
    let cfg = TrainConfig {
        max_epochs: a.epochs,
        patience: a.patience,
        hidden: a.hidden.clone(),
        dropout: a.dropout,
        adam: network::AdamConfig { step_size: a.learning_rate, ..Default::default() },
        validation_loss: ValidationLoss::Balanced,
        seed: a.seed.rotate_left(17),
    };
    let (net, history) = network::train(&tr, &va, &spec, &cfg)?;
    let ckpt = Checkpoint { network: net, class_names: ds.class_labels(), standardizer: scaler };
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    network::write_checkpoint(&a.out, &ckpt)?;
    if let Some(path) = &a.history {
        let mut body = String::from("epoch,train_loss,validation_loss,validation_gmean\n");
        for e in &history.epochs {
            body.push_str(&format!("{},{},{},{}\n", e.epoch, e.train_loss, e.validation_loss, e.validation_gmean));
        }
        write_file(path, &body)?;
    }
    println!(
        "trained {} epochs (best {}), checkpoint written to {}",
        history.epochs.len(),
        history.best_epoch,
        a.out.display()
    );
    Ok(())
}

/// Stratified (train, validation) row split of a single dataset.
fn holdout_indices(labels: &[usize], n_classes: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    use rand::seq::SliceRandom;
    let mut rng = crate::seeded_rng(seed);
    let mut by_class = vec![Vec::new(); n_classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for rows in &mut by_class {
        rows.shuffle(&mut rng);
        let n = rows.len();
        let k = if n < 2 { 0 } else { ((fraction * n as f64).round() as usize).clamp(1, n - 1) };
        val.extend_from_slice(&rows[..k]);
        train.extend_from_slice(&rows[k..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Loads a checkpoint and a CSV mapped onto its classes, standardized if
/// the checkpoint carries a scaler.
fn load_model_and_data(model: &Path, csv: &CsvArgs) -> Result<(Checkpoint<f64>, Dataset<f64>, Dataset<f64>)> {
    let ckpt: Checkpoint<f64> = network::read_checkpoint(model)?;
    let raw = csv.load_with_classes(&ckpt.class_names)?;
    let prepared = match &ckpt.standardizer {
        Some(z) => z.apply(&raw)?,
        None => raw.clone(),
    };
    Ok((ckpt, raw, prepared))
}

/// Probabilities of a checkpoint on a CSV file, as `eval` computes them.
pub fn checkpoint_probabilities(model: &Path, data: &Path, label_column: &str) -> Result<crate::Matrix<f64>> {
    let csv = CsvArgs { data: data.to_path_buf(), label_column: label_column.to_string(), no_header: false };
    let (ckpt, _, ds) = load_model_and_data(model, &csv)?;
    ckpt.network.predict(ds.features())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    print_resolved("eval", a);
    let (ckpt, _, ds) = load_model_and_data(&a.model, &a.csv)?;
    let probs = ckpt.network.predict(ds.features())?;
    let report = evaluate(&probs, ds.labels())?;
    print!("{report}");
    if let Some(path) = &a.out {
        let header = MetricsReport::<f64>::csv_header(report.n_classes()).join(",");
        write_file(path, &format!("{header}\n{}\n", report.csv_fields().join(",")))?;
    }
    Ok(())
}

fn cmd_experiment(exp: &ExperimentArgs, alphas: Option<&[f64]>) -> Result<()> {
    let cfg = exp.resolve()?;
    let name = if alphas.is_some() { "sweep" } else { "compare" };
    println!("# remix {name}: resolved configuration");
    if let Some(a) = alphas {
        println!("alphas = {a:?}");
    }
    println!("{}", cfg.to_toml());
    let table = match alphas {
        Some(a) => harness::sweep_alpha::<f64>(&cfg, a)?,
        None => harness::run_experiment::<f64>(&cfg)?,
    };
    table.write_all(&cfg.out_dir, &cfg)?;
    print!("{}", table.aggregates_csv());
    println!(
        "{} runs, {} failures; tables written to {}",
        table.rows.len(),
        table.failures.len(),
        cfg.out_dir.display()
    );
    Ok(())
}

fn cmd_surface(a: &SurfaceArgs) -> Result<()> {
    print_resolved("surface", a);
    let (ckpt, raw, prepared) = load_model_and_data(&a.model, &a.csv)?;
    if raw.n_features() != 2 {
        return Err(Error::invalid(format!("surface needs 2-D data, got {} features", raw.n_features())));
    }
    let grid = match &ckpt.standardizer {
        // build the grid in raw coordinates, predict in standardized ones
        Some(z) => {
            let mut g = harness::export_surface(&ckpt.network, &raw, a.resolution, a.margin)?;
            let coords =
                crate::Matrix::from_vec(g.rows.rows(), 2, g.rows.iter_rows().flat_map(|r| [r[0], r[1]]).collect())?;
            let probs = ckpt.network.predict(&z.transform(&coords)?)?;
            for i in 0..g.rows.rows() {
                g.rows.row_mut(i)[2..].copy_from_slice(probs.row(i));
            }
            g
        }
        None => harness::export_surface(&ckpt.network, &prepared, a.resolution, a.margin)?,
    };
    write_file(&a.out, &grid.to_csv())?;
    println!(
        "wrote {} grid points to {}; minority-class area fraction {}",
        grid.rows.rows(),
        a.out.display(),
        grid.area_fraction(raw.minority_class())
    );
    Ok(())
}

fn cmd_kde(a: &KdeArgs) -> Result<()> {
    print_resolved("kde", a);
    let ds = a.csv.load()?;
    let spec = SamplerSpec {
        strategy: a.strategy.parse()?,
        batch_size: a.batch_size,
        alpha: a.alpha,
        k_neighbors: a.k_neighbors,
        seed: a.seed,
    };
    let bw: Bandwidth = a.bandwidth.parse()?;
    let m = harness::export_mixed_distribution(&ds, &spec, a.n_batches, bw)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    m.features.write_csv(&a.out_dir.join("kde_features.csv"), "x")?;
    m.labels.write_csv(&a.out_dir.join("kde_labels.csv"), "minority_label")?;
    println!(
        "{} mixed samples; bandwidths {} (features), {} (labels); written to {}",
        m.feature_values.len(),
        m.features.bandwidth,
        m.labels.bandwidth,
        a.out_dir.display()
    );
    Ok(())
}

/// Parses `argv` (program name first) and runs the command; returns the
/// process exit status.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_experiment(&a.exp, Some(&a.alphas)),
        Command::Surface(a) => cmd_surface(a),
        Command::Kde(a) => cmd_kde(a),
        Command::Compare(a) => cmd_experiment(&a.exp, None),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace(['\n', '\r'], " ");
            eprintln!("error: {}: {msg}", e.kind());
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn holdout_is_stratified() {
        let labels: Vec<usize> = [vec![0; 70], vec![1; 10]].concat();
        let (tr, va) = holdout_indices(&labels, 2, 0.3, 1);
        assert_eq!(tr.len() + va.len(), 80);
        assert_eq!(va.iter().filter(|&&i| labels[i] == 1).count(), 3);
    }
}
