use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::data::{imbalance, split_indices, Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, gain, rank_methods, MetricsReport, MULTICLASS_BRIER_NOTE};
use crate::network::{train, TrainConfig};
use crate::sampling::Strategy;
use crate::scalar::Scalar;

use super::{cell_seed, run_seed, ExperimentConfig};

/// A method together with the alpha it was run at (mixing methods only).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variant {
    pub method: Strategy,
    pub alpha: Option<f64>,
}

impl Variant {
    pub fn label(&self) -> String {
        match self.alpha {
            Some(a) => format!("{}@{a}", self.method),
            None => self.method.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub dataset: String,
    pub ir: f64,
    pub variant: Variant,
    pub repetition: usize,
    pub fold: usize,
    pub seed: u64,
    pub epochs: usize,
    pub best_epoch: usize,
    pub report: MetricsReport<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FailedRun {
    pub dataset: String,
    pub ir: f64,
    pub variant: Variant,
    pub repetition: usize,
    pub fold: usize,
    pub error: String,
}

/// Mean and sample standard deviation over the successful runs of one
/// (dataset, IR, variant) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub dataset: String,
    pub ir: f64,
    pub variant: Variant,
    pub n_runs: usize,
    pub gmean_mean: f64,
    pub gmean_std: f64,
    pub bbs_mean: f64,
    pub bbs_std: f64,
    pub brier_mean: f64,
    pub brier_std: f64,
    /// Mean per-split gains over the baseline; `None` without baseline runs.
    pub gm_gain: Option<f64>,
    pub bbs_gain: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankSum {
    pub variant: Variant,
    pub gm_rank_sum: f64,
    pub bbs_rank_sum: f64,
    /// IR cells the variant was ranked in.
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub dataset: String,
    pub n_classes: usize,
    pub variants: Vec<Variant>,
    pub irs: Vec<f64>,
    pub rows: Vec<RunRow>,
    pub failures: Vec<FailedRun>,
    pub aggregates: Vec<Aggregate>,
    pub rank_sums: Vec<RankSum>,
}

/// Mean and sample (n - 1) standard deviation; the std of one value is 0.
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / (n - 1) as f64).sqrt())
}

struct Task {
    ir_index: usize,
    split_index: usize,
    variant_index: usize,
}

/// Runs every variant on every CV split of every IR level.
fn run_variants<T: Scalar>(cfg: &ExperimentConfig, variants: &[Variant]) -> Result<ResultTable> {
    let base: Dataset<T> = cfg.dataset.load(cfg.seed)?;
    cfg.validate(&base)?;

    let mut cells = Vec::with_capacity(cfg.irs.len());
    for &ir in &cfg.irs {
        let ds = imbalance(&base, &cfg.minority_classes, ir, cell_seed(cfg.seed, &cfg.name, ir, "imbalance"))?;
        let plan = cfg.split_plan(cell_seed(cfg.seed, &cfg.name, ir, "split"));
        let splits = split_indices(ds.labels(), ds.n_classes(), &plan)?;
        cells.push((ds, splits));
    }

    let mut tasks = Vec::new();
    for (ir_index, (_, splits)) in cells.iter().enumerate() {
        for split_index in 0..splits.len() {
            for variant_index in 0..variants.len() {
                tasks.push(Task { ir_index, split_index, variant_index });
            }
        }
    }

    let run = |task: &Task| -> std::result::Result<RunRow, FailedRun> {
        let ir = cfg.irs[task.ir_index];
        let (ds, splits) = &cells[task.ir_index];
        let s = &splits[task.split_index];
        let variant = variants[task.variant_index];
        let seed = run_seed(cfg.seed, &cfg.name, ir, variant.method, s.fold, s.repetition);
        let fail = |e: Error| FailedRun {
            dataset: cfg.name.clone(),
            ir,
            variant,
            repetition: s.repetition,
            fold: s.fold,
            error: e.to_string(),
        };
        let outcome = (|| -> Result<RunRow> {
            let (mut tr, mut va, mut te) = (ds.subset(&s.train)?, ds.subset(&s.validation)?, ds.subset(&s.test)?);
            if cfg.standardize {
                let z = Standardizer::fit(tr.features());
                tr = z.apply(&tr)?;
                va = z.apply(&va)?;
                te = z.apply(&te)?;
            }
            let mut spec = cfg.sampler_spec(variant.method, seed);
            if let Some(a) = variant.alpha {
                spec.alpha = a;
            }
            let tc = TrainConfig { seed: seed.rotate_left(17), ..cfg.train.clone() };
            let (net, history) = train(&tr, &va, &spec, &tc)?;
            let probs = net.predict(te.features())?;
            let report = evaluate(&probs, te.labels())?.to_f64();
            Ok(RunRow {
                dataset: cfg.name.clone(),
                ir,
                variant,
                repetition: s.repetition,
                fold: s.fold,
                seed,
                epochs: history.epochs.len(),
                best_epoch: history.best_epoch,
                report,
            })
        })();
        outcome.map_err(fail)
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} worker threads: {e}", cfg.jobs)))?;
    let outcomes: Vec<_> = pool.install(|| tasks.par_iter().map(run).collect());

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => rows.push(r),
            Err(f) => failures.push(f),
        }
    }
    let aggregates = aggregate(&cfg.name, &cfg.irs, variants, &rows);
    let rank_sums = rank_sums(&cfg.irs, variants, &aggregates);
    Ok(ResultTable {
        dataset: cfg.name.clone(),
        n_classes: base.n_classes(),
        variants: variants.to_vec(),
        irs: cfg.irs.clone(),
        rows,
        failures,
        aggregates,
        rank_sums,
    })
}

fn aggregate(dataset: &str, irs: &[f64], variants: &[Variant], rows: &[RunRow]) -> Vec<Aggregate> {
    let mut out = Vec::new();
    for &ir in irs {
        let baseline: Vec<&RunRow> =
            rows.iter().filter(|r| r.ir == ir && r.variant.method == Strategy::Baseline).collect();
        for v in variants {
            let members: Vec<&RunRow> = rows.iter().filter(|r| r.ir == ir && r.variant == *v).collect();
            if members.is_empty() {
                continue;
            }
            let (gmean_mean, gmean_std) = mean_and_std(&members.iter().map(|r| r.report.gmean).collect::<Vec<_>>());
            let (bbs_mean, bbs_std) = mean_and_std(&members.iter().map(|r| r.report.bbs).collect::<Vec<_>>());
            let (brier_mean, brier_std) =
                mean_and_std(&members.iter().map(|r| r.report.brier_overall).collect::<Vec<_>>());
            let gains: Vec<(f64, f64)> = members
                .iter()
                .filter_map(|m| {
                    baseline
                        .iter()
                        .find(|b| b.repetition == m.repetition && b.fold == m.fold)
                        .map(|b| gain(&m.report, &b.report))
                })
                .collect();
            let (gm_gain, bbs_gain) = if gains.is_empty() {
                (None, None)
            } else {
                let n = gains.len() as f64;
                (Some(gains.iter().map(|g| g.0).sum::<f64>() / n), Some(gains.iter().map(|g| g.1).sum::<f64>() / n))
            };
            out.push(Aggregate {
                dataset: dataset.to_string(),
                ir,
                variant: *v,
                n_runs: members.len(),
                gmean_mean,
                gmean_std,
                bbs_mean,
                bbs_std,
                brier_mean,
                brier_std,
                gm_gain,
                bbs_gain,
            });
        }
    }
    out
}

/// Sum over IR cells of each variant's rank by mean GM (higher is better)
/// and mean BBS (lower is better).
fn rank_sums(irs: &[f64], variants: &[Variant], aggregates: &[Aggregate]) -> Vec<RankSum> {
    let mut sums: Vec<RankSum> =
        variants.iter().map(|v| RankSum { variant: *v, gm_rank_sum: 0.0, bbs_rank_sum: 0.0, cells: 0 }).collect();
    for &ir in irs {
        let present: Vec<(usize, &Aggregate)> = variants
            .iter()
            .enumerate()
            .filter_map(|(i, v)| aggregates.iter().find(|a| a.ir == ir && a.variant == *v).map(|a| (i, a)))
            .collect();
        if present.len() < 2 {
            continue;
        }
        let gm = rank_methods(&present.iter().map(|(_, a)| a.gmean_mean).collect::<Vec<_>>(), true);
        let bbs = rank_methods(&present.iter().map(|(_, a)| a.bbs_mean).collect::<Vec<_>>(), false);
        for (k, (i, _)) in present.iter().enumerate() {
            sums[*i].gm_rank_sum += gm[k];
            sums[*i].bbs_rank_sum += bbs[k];
            sums[*i].cells += 1;
        }
    }
    sums
}

/// Cross-validated comparison of `cfg.methods` at every IR in `cfg.irs`.
pub fn run_experiment<T: Scalar>(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let variants: Vec<Variant> = cfg
        .methods
        .iter()
        .map(|&m| Variant { method: m, alpha: m.uses_alpha().then(|| cfg.sampler_spec(m, 0).alpha) })
        .collect();
    run_variants::<T>(cfg, &variants)
}

/// Like [`run_experiment`], with the ReMix variant repeated once per alpha.
pub fn sweep_alpha<T: Scalar>(cfg: &ExperimentConfig, alphas: &[f64]) -> Result<ResultTable> {
    if !cfg.methods.contains(&Strategy::Remix) {
        return Err(Error::Config("alpha sweep needs remix among the methods".into()));
    }
    if alphas.is_empty() {
        return Err(Error::Config("alpha list is empty".into()));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
        return Err(Error::invalid(format!("alpha {a} must be finite and >= 0")));
    }
    let mut variants = Vec::new();
    for &m in &cfg.methods {
        if m == Strategy::Remix {
            variants.extend(alphas.iter().map(|&a| Variant { method: m, alpha: Some(a) }));
        } else {
            variants.push(Variant { method: m, alpha: m.uses_alpha().then(|| cfg.sampler_spec(m, 0).alpha) });
        }
    }
    run_variants::<T>(cfg, &variants)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ResultTable {
    pub fn aggregate(&self, ir: f64, method: Strategy, alpha: Option<f64>) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.ir == ir && a.variant.method == method && (alpha.is_none() || a.variant.alpha == alpha))
    }

    pub fn rank_sum(&self, method: Strategy) -> Option<&RankSum> {
        self.rank_sums.iter().find(|r| r.variant.method == method)
    }

    /// `dataset,ir,method,alpha,repetition,fold,seed,epochs,best_epoch`
    /// followed by the metrics columns of [`MetricsReport::csv_header`].
    pub fn results_csv(&self) -> String {
        let mut out = String::new();
        let mut header = vec!["dataset", "ir", "method", "alpha", "repetition", "fold", "seed", "epochs", "best_epoch"]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>();
        header.extend(MetricsReport::<f64>::csv_header(self.n_classes));
        out.push_str(&header.join(","));
        out.push('\n');
        for r in &self.rows {
            let mut f = vec![
                r.dataset.clone(),
                r.ir.to_string(),
                r.variant.method.to_string(),
                opt(r.variant.alpha),
                r.repetition.to_string(),
                r.fold.to_string(),
                r.seed.to_string(),
                r.epochs.to_string(),
                r.best_epoch.to_string(),
            ];
            f.extend(r.report.csv_fields());
            out.push_str(&f.join(","));
            out.push('\n');
        }
        out
    }

    /// `dataset,ir,method,alpha,n_runs,gmean_mean,gmean_std,bbs_mean,bbs_std,brier_mean,brier_std,gm_gain,bbs_gain`
    pub fn aggregates_csv(&self) -> String {
        let mut out = String::from(
            "dataset,ir,method,alpha,n_runs,gmean_mean,gmean_std,bbs_mean,bbs_std,brier_mean,brier_std,gm_gain,bbs_gain\n",
        );
        for a in &self.aggregates {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                a.dataset,
                a.ir,
                a.variant.method,
                opt(a.variant.alpha),
                a.n_runs,
                a.gmean_mean,
                a.gmean_std,
                a.bbs_mean,
                a.bbs_std,
                a.brier_mean,
                a.brier_std,
                opt(a.gm_gain),
                opt(a.bbs_gain)
            );
        }
        out
    }

    /// `method,alpha,gm_rank_sum,bbs_rank_sum,cells`
    pub fn ranks_csv(&self) -> String {
        let mut out = String::from("method,alpha,gm_rank_sum,bbs_rank_sum,cells\n");
        for r in &self.rank_sums {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.variant.method,
                opt(r.variant.alpha),
                r.gm_rank_sum,
                r.bbs_rank_sum,
                r.cells
            );
        }
        out
    }

    /// `dataset,ir,method,alpha,repetition,fold,error`
    pub fn failures_csv(&self) -> String {
        let mut out = String::from("dataset,ir,method,alpha,repetition,fold,error\n");
        for f in &self.failures {
            let msg = f.error.replace('"', "'");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},\"{msg}\"",
                f.dataset,
                f.ir,
                f.variant.method,
                opt(f.variant.alpha),
                f.repetition,
                f.fold
            );
        }
        out
    }

    /// Writes `results.csv`, `aggregates.csv`, `ranks.csv`, `failures.csv`
    /// and `metadata.toml` (resolved config plus evaluation conventions).
    pub fn write_all(&self, dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let metadata = format!(
            "# evaluation conventions\n\
             brier = \"{MULTICLASS_BRIER_NOTE}\"\n\
             gmean = \"geometric mean of per-class recalls; argmax ties go to the lowest class\"\n\
             ranks = \"per (dataset, IR) cell on mean GM (higher better) and mean BBS (lower better); ties share the average rank; summed over cells\"\n\
             std = \"sample standard deviation (n - 1)\"\n\
             validation = \"stratified holdout of each training fold\"\n\
             standardize = {}\n\n\
             # resolved config\n{}",
            cfg.standardize,
            cfg.to_toml()
        );
        let files = [
            ("results.csv", self.results_csv()),
            ("aggregates.csv", self.aggregates_csv()),
            ("ranks.csv", self.ranks_csv()),
            ("failures.csv", self.failures_csv()),
            ("metadata.toml", metadata),
        ];
        for (name, body) in files {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::DatasetSource;
    use crate::network::TrainConfig;

    fn tiny(methods: Vec<Strategy>) -> ExperimentConfig {
        ExperimentConfig {
            name: "ring".into(),
            seed: 3,
            dataset: DatasetSource::Ring { n_major: 120, n_minor: 60, noise: 0.3 },
            minority_classes: vec![1],
            irs: vec![0.1, 0.05],
            methods,
            standardize: true,
            out_dir: "unused".into(),
            jobs: 1,
            sampler: Default::default(),
            overrides: Default::default(),
            train: TrainConfig { max_epochs: 3, patience: 1, hidden: vec![6], ..TrainConfig::default() },
            split: crate::harness::SplitSettings { fold_count: 2, repetitions: 2, validation_fraction: 0.3 },
        }
    }

    #[test]
    fn cardinality_and_aggregates() {
        let cfg = tiny(Strategy::ALL.to_vec());
        let t = run_experiment::<f64>(&cfg).unwrap();
        assert!(t.failures.is_empty(), "{:?}", t.failures);
        assert_eq!(t.rows.len(), 2 * 5 * 4);
        for a in &t.aggregates {
            let members: Vec<f64> =
                t.rows.iter().filter(|r| r.ir == a.ir && r.variant == a.variant).map(|r| r.report.gmean).collect();
            let mean = members.iter().sum::<f64>() / members.len() as f64;
            assert!((mean - a.gmean_mean).abs() < 1e-12);
        }
        let total: f64 = t.rank_sums.iter().map(|r| r.bbs_rank_sum).sum();
        assert_eq!(total, 2.0 * 15.0);
    }

    #[test]
    fn baseline_only_has_zero_gain() {
        let t = run_experiment::<f64>(&tiny(vec![Strategy::Baseline])).unwrap();
        for a in &t.aggregates {
            assert_eq!(a.gm_gain, Some(0.0));
            assert_eq!(a.bbs_gain, Some(0.0));
        }
    }

    #[test]
    fn single_alpha_sweep_matches_run() {
        let mut cfg = tiny(vec![Strategy::Baseline, Strategy::Remix]);
        cfg.sampler.alpha = 0.1;
        let run = run_experiment::<f64>(&cfg).unwrap();
        let sweep = sweep_alpha::<f64>(&cfg, &[0.1]).unwrap();
        assert_eq!(run.aggregates, sweep.aggregates);
        assert_eq!(run.results_csv(), sweep.results_csv());
    }

    #[test]
    fn failures_are_recorded() {
        let mut cfg = tiny(vec![Strategy::Baseline, Strategy::Smote]);
        cfg.overrides
            .insert(Strategy::Smote, crate::harness::SamplerOverride { batch_size: Some(1), ..Default::default() });
        // validation is per config, so bypass it by running the variant directly
        let variants =
            [Variant { method: Strategy::Baseline, alpha: None }, Variant { method: Strategy::Smote, alpha: None }];
        assert!(run_variants::<f64>(&cfg, &variants).is_err());
        cfg.overrides.clear();
        cfg.train.adam.step_size = f64::MAX;
        let t = run_variants::<f64>(&cfg, &variants).unwrap_or_else(|e| panic!("{e}"));
        assert_eq!(t.failures.len() + t.rows.len(), 16);
    }

    #[test]
    fn std_is_sample_std() {
        let (m, s) = mean_and_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_and_std(&[2.0]), (2.0, 0.0));
    }
}
