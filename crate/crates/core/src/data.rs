//! Labeled datasets: synthetic generators, CSV ingestion, imbalancing and
//! stratified repeated k-fold splitting with a held-out validation portion.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::seeded_rng;

/// Feature matrix plus integer class labels over `0..n_classes`.
///
/// [`Dataset::new`] enforces the full invariants (finite features, at least
/// two classes, every class present). Subsets produced by [`Dataset::subset`]
/// keep the parent's class inventory and may lack a class.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    features: Matrix<T>,
    labels: Vec<usize>,
    n_classes: usize,
    class_names: Option<Vec<String>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        features: Matrix<T>,
        labels: Vec<usize>,
        n_classes: usize,
        class_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let ds = Self::new_unchecked_presence(features, labels, n_classes, class_names)?;
        if let Some(c) = ds.class_counts().iter().position(|&n| n == 0) {
            return Err(Error::invalid(format!("class {c} has no instances")));
        }
        Ok(ds)
    }

    fn new_unchecked_presence(
        features: Matrix<T>,
        labels: Vec<usize>,
        n_classes: usize,
        class_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if features.rows() == 0 || features.cols() == 0 {
            return Err(Error::invalid("dataset needs at least one row and one feature"));
        }
        if features.rows() != labels.len() {
            return Err(Error::invalid(format!("{} feature rows but {} labels", features.rows(), labels.len())));
        }
        if n_classes < 2 {
            return Err(Error::invalid("dataset needs at least two classes"));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= n_classes) {
            return Err(Error::invalid(format!("label {bad} out of range 0..{n_classes}")));
        }
        if let Some(names) = &class_names {
            if names.len() != n_classes {
                return Err(Error::invalid("class_names length differs from class count"));
            }
        }
        if !features.is_finite() {
            return Err(Error::invalid("features contain NaN or infinite values"));
        }
        Ok(Self { features, labels, n_classes, class_names })
    }

    pub fn features(&self) -> &Matrix<T> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }

    /// Class names, falling back to the decimal class index.
    pub fn class_labels(&self) -> Vec<String> {
        match &self.class_names {
            Some(n) => n.clone(),
            None => (0..self.n_classes).map(|c| c.to_string()).collect(),
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Row indices grouped by class.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut idx = vec![Vec::new(); self.n_classes];
        for (i, &y) in self.labels.iter().enumerate() {
            idx[y].push(i);
        }
        idx
    }

    /// Least frequent class; ties resolve to the lowest index.
    pub fn minority_class(&self) -> usize {
        let counts = self.class_counts();
        let mut best = 0;
        for (c, &n) in counts.iter().enumerate() {
            if n < counts[best] {
                best = c;
            }
        }
        best
    }

    /// Rows at `indices`, in the given order. The class inventory is kept.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new_unchecked_presence(
            self.features.select_rows(indices),
            indices.iter().map(|&i| self.labels[i]).collect(),
            self.n_classes,
            self.class_names.clone(),
        )
    }

    /// Same rows with transformed features.
    pub fn with_features(&self, features: Matrix<T>) -> Result<Self> {
        if features.rows() != self.len() {
            return Err(Error::invalid("replacement features change the row count"));
        }
        Self::new_unchecked_presence(features, self.labels.clone(), self.n_classes, self.class_names.clone())
    }

    /// Writes `x0..x{D-1},label` with a header; labels use class names when known.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = String::new();
        for j in 0..self.n_features() {
            out.push_str(&format!("x{j},"));
        }
        out.push_str("label\n");
        let names = self.class_labels();
        for (row, &y) in self.features.iter_rows().zip(&self.labels) {
            for v in row {
                out.push_str(&format!("{v},"));
            }
            out.push_str(&names[y]);
            out.push('\n');
        }
        file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

fn normal<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> T {
    let z: f64 = rng.sample(StandardNormal);
    T::lit(z)
}

/// Binary 2-D ring: class 0 on the unit circle, class 1 a Gaussian blob at
/// the origin. Both receive isotropic Gaussian noise with std `noise`.
pub fn make_ring<T: Scalar>(n_major: usize, n_minor: usize, noise: f64, seed: u64) -> Result<Dataset<T>> {
    if n_major == 0 || n_minor == 0 {
        return Err(Error::invalid("ring class counts must be positive"));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::invalid("noise must be a finite nonnegative real"));
    }
    let mut rng = seeded_rng(seed);
    let noise = T::lit(noise);
    let mut data = Vec::with_capacity(2 * (n_major + n_minor));
    for _ in 0..n_major {
        let angle = T::lit(rng.random::<f64>()) * T::TAU();
        data.push(angle.cos() + noise * normal(&mut rng));
        data.push(angle.sin() + noise * normal(&mut rng));
    }
    for _ in 0..n_minor {
        data.push(noise * normal(&mut rng));
        data.push(noise * normal(&mut rng));
    }
    let labels = std::iter::repeat_n(0, n_major).chain(std::iter::repeat_n(1, n_minor)).collect();
    Dataset::new(Matrix::from_vec(n_major + n_minor, 2, data)?, labels, 2, None)
}

/// Binary overlapping Gaussians with unit covariance: class 0 centered at the
/// origin, class 1 shifted by `separation` along the first axis.
pub fn make_two_gaussians<T: Scalar>(
    n_major: usize,
    n_minor: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset<T>> {
    if n_major == 0 || n_minor == 0 || dim == 0 {
        return Err(Error::invalid("class counts and dimension must be positive"));
    }
    let mut rng = seeded_rng(seed);
    let mut data = Vec::with_capacity(dim * (n_major + n_minor));
    for (count, shift) in [(n_major, 0.0), (n_minor, separation)] {
        for _ in 0..count {
            data.push(T::lit(shift) + normal(&mut rng));
            for _ in 1..dim {
                data.push(normal(&mut rng));
            }
        }
    }
    let labels = std::iter::repeat_n(0, n_major).chain(std::iter::repeat_n(1, n_minor)).collect();
    Dataset::new(Matrix::from_vec(n_major + n_minor, dim, data)?, labels, 2, None)
}

/// Multi-class Gaussian mixture. Class `c` of `C` is centered at angle
/// `2πc/C` on a circle of `radius` in the first two dimensions, with
/// isotropic std `spread`.
pub fn make_gaussian_mixture<T: Scalar>(
    counts: &[usize],
    dim: usize,
    radius: f64,
    spread: f64,
    seed: u64,
) -> Result<Dataset<T>> {
    if counts.len() < 2 || counts.contains(&0) {
        return Err(Error::invalid("mixture needs at least two nonempty classes"));
    }
    if dim < 2 {
        return Err(Error::invalid("mixture needs at least two dimensions"));
    }
    let mut rng = seeded_rng(seed);
    let n: usize = counts.iter().sum();
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    let n_classes = counts.len();
    for (c, &count) in counts.iter().enumerate() {
        let angle = std::f64::consts::TAU * c as f64 / n_classes as f64;
        let center = [radius * angle.cos(), radius * angle.sin()];
        for _ in 0..count {
            for j in 0..dim {
                let mu = center.get(j).copied().unwrap_or(0.0);
                data.push(T::lit(mu) + T::lit(spread) * normal(&mut rng));
            }
            labels.push(c);
        }
    }
    Dataset::new(Matrix::from_vec(n, dim, data)?, labels, n_classes, None)
}

/// Which CSV column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    /// 0-based column index.
    Index(usize),
}

impl std::fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LabelColumn::Name(n) => write!(f, "{n:?}"),
            LabelColumn::Index(i) => write!(f, "#{i}"),
        }
    }
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    /// All-digit strings are indices; anything else is a header name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

/// Loads a CSV dataset. Labels are mapped to `0..C` in order of first
/// appearance and the raw label strings are kept as class names.
pub fn load_csv<T: Scalar>(path: &Path, label_column: &LabelColumn, has_header: bool) -> Result<Dataset<T>> {
    load_csv_impl(path, label_column, has_header, None)
}

/// Loads a CSV dataset whose labels must belong to a known class inventory
/// (for example the class names stored in a checkpoint).
pub fn load_csv_with_classes<T: Scalar>(
    path: &Path,
    label_column: &LabelColumn,
    has_header: bool,
    classes: &[String],
) -> Result<Dataset<T>> {
    load_csv_impl(path, label_column, has_header, Some(classes))
}

fn load_csv_impl<T: Scalar>(
    path: &Path,
    label_column: &LabelColumn,
    has_header: bool,
    known: Option<&[String]>,
) -> Result<Dataset<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader =
        csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(BufReader::new(file));
    let mut records = reader.records();

    let mut label_idx = match label_column {
        LabelColumn::Index(i) => Some(*i),
        LabelColumn::Name(_) => None,
    };
    let mut row_no = 0usize;
    if has_header {
        let Some(header) = records.next() else {
            return Err(Error::invalid(format!("{} is empty", path.display())));
        };
        let header = header?;
        row_no += 1;
        if let LabelColumn::Name(name) = label_column {
            label_idx = header.iter().position(|h| h == name);
        }
    }
    let label_idx = label_idx.ok_or_else(|| Error::MissingLabelColumn(label_column.to_string()))?;

    let mut mapping: HashMap<String, usize> = HashMap::new();
    let mut names: Vec<String> = Vec::new();
    if let Some(classes) = known {
        for (i, c) in classes.iter().enumerate() {
            mapping.insert(c.clone(), i);
            names.push(c.clone());
        }
    }
    let mut data: Vec<T> = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for record in records {
        let record = record?;
        row_no += 1;
        if label_idx >= record.len() {
            return Err(Error::MissingLabelColumn(label_column.to_string()));
        }
        let n_feat = record.len() - 1;
        match width {
            None => width = Some(n_feat),
            Some(w) if w != n_feat => {
                return Err(Error::invalid(format!("row {row_no} has {} columns, expected {}", record.len(), w + 1)))
            }
            _ => {}
        }
        for (j, cell) in record.iter().enumerate() {
            if j == label_idx {
                continue;
            }
            let v: f64 =
                cell.parse().map_err(|_| Error::Parse { row: row_no, column: j + 1, value: cell.to_string() })?;
            if !v.is_finite() {
                return Err(Error::Parse { row: row_no, column: j + 1, value: cell.to_string() });
            }
            data.push(T::lit(v));
        }
        let raw = &record[label_idx];
        let y = match mapping.get(raw) {
            Some(&y) => y,
            None if known.is_some() => return Err(Error::UnknownClass(raw.to_string())),
            None => {
                let y = names.len();
                mapping.insert(raw.to_string(), y);
                names.push(raw.to_string());
                y
            }
        };
        labels.push(y);
    }
    let width = width.ok_or_else(|| Error::invalid(format!("{} has no data rows", path.display())))?;
    if known.is_none() && names.len() < 2 {
        return Err(Error::SingleClass(names.first().cloned().unwrap_or_default()));
    }
    let n_classes = names.len();
    let features = Matrix::from_vec(labels.len(), width, data)?;
    if known.is_some() {
        // evaluation files need not contain every class
        Dataset::new_unchecked_presence(features, labels, n_classes, Some(names))
    } else {
        Dataset::new(features, labels, n_classes, Some(names))
    }
}

/// Downsamples `minority_classes` so that total minority / total majority
/// equals `target_ir`, split evenly over the minority classes. Majority rows
/// are kept untouched and the original row order is preserved.
pub fn imbalance<T: Scalar>(
    ds: &Dataset<T>,
    minority_classes: &[usize],
    target_ir: f64,
    seed: u64,
) -> Result<Dataset<T>> {
    let c = ds.n_classes();
    let mut is_minor = vec![false; c];
    for &m in minority_classes {
        if m >= c {
            return Err(Error::invalid(format!("minority class {m} out of range 0..{c}")));
        }
        is_minor[m] = true;
    }
    let n_minor_classes = is_minor.iter().filter(|&&b| b).count();
    if n_minor_classes == 0 || n_minor_classes == c {
        return Err(Error::invalid("minority classes must be a nonempty proper subset of the classes"));
    }
    if !(target_ir > 0.0 && target_ir <= 1.0) {
        return Err(Error::invalid(format!("target IR {target_ir} outside (0, 1]")));
    }
    let counts = ds.class_counts();
    let n_major: usize = (0..c).filter(|&k| !is_minor[k]).map(|k| counts[k]).sum();
    let target = (target_ir * n_major as f64 / n_minor_classes as f64).round() as usize;
    let smallest = (0..c).filter(|&k| is_minor[k]).map(|k| counts[k]).min().unwrap_or(0);
    if target < 1 || target > smallest {
        let min_ir = n_minor_classes as f64 / n_major as f64;
        let max_ir = (n_minor_classes * smallest) as f64 / n_major as f64;
        return Err(Error::invalid(format!(
            "target IR {target_ir} needs {target} rows per minority class; achievable IR range is [{min_ir}, {max_ir}] (minimum achievable IR {min_ir})"
        )));
    }

    let mut rng = seeded_rng(seed);
    let mut keep = vec![false; ds.len()];
    for (k, rows) in ds.class_indices().into_iter().enumerate() {
        if is_minor[k] {
            let mut rows = rows;
            rows.shuffle(&mut rng);
            for &i in &rows[..target] {
                keep[i] = true;
            }
        } else {
            for i in rows {
                keep[i] = true;
            }
        }
    }
    let rows: Vec<usize> = (0..ds.len()).filter(|&i| keep[i]).collect();
    ds.subset(&rows)
}

/// Repeated stratified k-fold plan with a stratified validation holdout.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SplitPlan {
    pub fold_count: usize,
    pub repetitions: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for SplitPlan {
    fn default() -> Self {
        Self { fold_count: 2, repetitions: 10, validation_fraction: 0.3, seed: 0 }
    }
}

impl SplitPlan {
    pub fn validate(&self) -> Result<()> {
        if self.fold_count < 2 {
            return Err(Error::invalid("fold_count must be at least 2"));
        }
        if self.repetitions < 1 {
            return Err(Error::invalid("repetitions must be positive"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::invalid("validation_fraction must lie strictly in (0, 1)"));
        }
        Ok(())
    }
}

/// Row indices of one (train, validation, test) triple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub repetition: usize,
    pub fold: usize,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Split<T> {
    pub repetition: usize,
    pub fold: usize,
    pub train: Dataset<T>,
    pub validation: Dataset<T>,
    pub test: Dataset<T>,
}

/// Number of validation rows drawn from a class with `n` training rows.
/// Keeps at least one row on each side whenever the class has two or more.
fn validation_count(n: usize, fraction: f64) -> usize {
    if n < 2 {
        return 0;
    }
    ((fraction * n as f64).round() as usize).clamp(1, n - 1)
}

/// Index form of [`split`]; emitted in (repetition, fold) order.
pub fn split_indices(labels: &[usize], n_classes: usize, plan: &SplitPlan) -> Result<Vec<SplitIndices>> {
    plan.validate()?;
    let mut by_class = vec![Vec::new(); n_classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    if let Some((c, rows)) = by_class.iter().enumerate().find(|(_, rows)| rows.len() < plan.fold_count) {
        return Err(Error::invalid(format!(
            "class {c} has {} rows, fewer than fold_count {}",
            rows.len(),
            plan.fold_count
        )));
    }
    let k = plan.fold_count;
    let mut out = Vec::with_capacity(k * plan.repetitions);
    for rep in 0..plan.repetitions {
        let mut rng = seeded_rng(plan.seed ^ rep as u64);
        // fold assignment per class, round robin with a running offset so
        // fold totals stay within one row of each other
        let mut fold_of: Vec<Vec<(usize, usize)>> = vec![Vec::new(); k];
        let mut offset = 0;
        for rows in &by_class {
            let mut rows = rows.clone();
            rows.shuffle(&mut rng);
            for (pos, &i) in rows.iter().enumerate() {
                let f = (offset + pos) % k;
                fold_of[f].push((labels[i], i));
            }
            offset = (offset + rows.len()) % k;
        }
        for fold in 0..k {
            let mut test: Vec<usize> = fold_of[fold].iter().map(|&(_, i)| i).collect();
            test.sort_unstable();
            let mut train_by_class = vec![Vec::new(); n_classes];
            for (f, members) in fold_of.iter().enumerate() {
                if f == fold {
                    continue;
                }
                for &(y, i) in members {
                    train_by_class[y].push(i);
                }
            }
            let mut train = Vec::new();
            let mut validation = Vec::new();
            for rows in &mut train_by_class {
                rows.shuffle(&mut rng);
                let n_val = validation_count(rows.len(), plan.validation_fraction);
                validation.extend_from_slice(&rows[..n_val]);
                train.extend_from_slice(&rows[n_val..]);
            }
            train.sort_unstable();
            validation.sort_unstable();
            out.push(SplitIndices { repetition: rep, fold, train, validation, test });
        }
    }
    Ok(out)
}

/// Stratified `fold_count`-fold cross validation repeated `repetitions`
/// times. Repetition `r` shuffles with `seed ^ r`; each fold is the test set
/// once and a stratified `validation_fraction` of the remaining rows becomes
/// the validation set.
pub fn split<T: Scalar>(ds: &Dataset<T>, plan: &SplitPlan) -> Result<Vec<Split<T>>> {
    split_indices(ds.labels(), ds.n_classes(), plan)?
        .into_iter()
        .map(|s| {
            Ok(Split {
                repetition: s.repetition,
                fold: s.fold,
                train: ds.subset(&s.train)?,
                validation: ds.subset(&s.validation)?,
                test: ds.subset(&s.test)?,
            })
        })
        .collect()
}

/// Per-feature z-score transform fitted on one dataset and applied to others.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer<T> {
    pub means: Vec<T>,
    pub stds: Vec<T>,
}

impl<T: Scalar> Standardizer<T> {
    /// Constant columns get unit scale.
    pub fn fit(features: &Matrix<T>) -> Self {
        let n = T::from_count(features.rows().max(1));
        let d = features.cols();
        let mut means = vec![T::zero(); d];
        for row in features.iter_rows() {
            for (m, &v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut stds = vec![T::zero(); d];
        for row in features.iter_rows() {
            for ((s, &m), &v) in stds.iter_mut().zip(&means).zip(row) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut stds {
            *s = (*s / n).sqrt();
            if s.is_nan() || *s <= T::zero() {
                *s = T::one();
            }
        }
        Self { means, stds }
    }

    pub fn transform(&self, features: &Matrix<T>) -> Result<Matrix<T>> {
        if features.cols() != self.means.len() {
            return Err(Error::invalid(format!(
                "standardizer fitted on {} features, got {}",
                self.means.len(),
                features.cols()
            )));
        }
        let mut out = features.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = (*v - self.means[j]) / self.stds[j];
            }
        }
        Ok(out)
    }

    pub fn apply(&self, ds: &Dataset<T>) -> Result<Dataset<T>> {
        ds.with_features(self.transform(ds.features())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn blocks(counts: &[usize]) -> Dataset<f64> {
        let n: usize = counts.iter().sum();
        let labels: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &k)| std::iter::repeat_n(c, k)).collect();
        let data = (0..n).map(|i| i as f64).collect();
        Dataset::new(Matrix::from_vec(n, 1, data).unwrap(), labels, counts.len(), None).unwrap()
    }

    #[test]
    fn ring_counts() {
        let ds = make_ring::<f64>(1000, 50, 0.1, 7).unwrap();
        assert_eq!(ds.len(), 1050);
        assert_eq!(ds.n_classes(), 2);
        assert_eq!(ds.class_counts(), vec![1000, 50]);
    }

    #[test]
    fn ring_zero_noise_on_unit_circle() {
        let ds = make_ring::<f64>(10, 10, 0.0, 1).unwrap();
        for (row, &y) in ds.features().iter_rows().zip(ds.labels()) {
            if y == 0 {
                let r = (row[0] * row[0] + row[1] * row[1]).sqrt();
                assert!((r - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ring_mean_radius() {
        let ds = make_ring::<f64>(1000, 50, 0.1, 7).unwrap();
        let radii: Vec<f64> = ds
            .features()
            .iter_rows()
            .zip(ds.labels())
            .filter(|(_, &y)| y == 0)
            .map(|(r, _)| r[0].hypot(r[1]))
            .collect();
        let mean = radii.iter().sum::<f64>() / radii.len() as f64;
        assert!((0.95..=1.05).contains(&mean), "{mean}");
    }

    #[test]
    fn ring_rejects_empty_class() {
        assert!(matches!(make_ring::<f64>(0, 5, 0.1, 1), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_ring::<f64>(5, 0, 0.1, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn imbalance_binary() {
        let ds = blocks(&[1000, 1000]);
        let out = imbalance(&ds, &[1], 0.01, 3).unwrap();
        assert_eq!(out.class_counts(), vec![1000, 10]);
    }

    #[test]
    fn imbalance_identity_at_one() {
        let ds = blocks(&[40, 40]);
        let out = imbalance(&ds, &[1], 1.0, 3).unwrap();
        assert_eq!(out, ds);
    }

    #[test]
    fn imbalance_three_class() {
        let ds = blocks(&[900, 900, 900]);
        let out = imbalance(&ds, &[1, 2], 0.1, 3).unwrap();
        assert_eq!(out.class_counts(), vec![900, 45, 45]);
    }

    #[test]
    fn imbalance_keeps_majority_rows() {
        let ds = blocks(&[300, 200, 100]);
        let out = imbalance(&ds, &[2], 0.05, 9).unwrap();
        let majority: BTreeSet<u64> =
            out.features().iter_rows().zip(out.labels()).filter(|(_, &y)| y != 2).map(|(r, _)| r[0] as u64).collect();
        assert_eq!(majority, (0..500).collect());
    }

    #[test]
    fn imbalance_reports_min_ir() {
        let ds = blocks(&[1000, 5]);
        let err = imbalance(&ds, &[1], 0.01, 1).unwrap_err();
        assert!(err.to_string().contains("minimum achievable IR 0.001"), "{err}");
        let err = imbalance(&ds, &[1], 0.0001, 1).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn imbalance_rejects_bad_subsets() {
        let ds = blocks(&[10, 10]);
        assert!(imbalance(&ds, &[], 0.5, 1).is_err());
        assert!(imbalance(&ds, &[0, 1], 0.5, 1).is_err());
        assert!(imbalance(&ds, &[2], 0.5, 1).is_err());
    }

    #[test]
    fn split_counts_and_partition() {
        let ds = blocks(&[60, 25, 15]);
        let plan = SplitPlan { fold_count: 2, repetitions: 10, validation_fraction: 0.3, seed: 5 };
        let splits = split_indices(ds.labels(), 3, &plan).unwrap();
        assert_eq!(splits.len(), 20);
        for rep in 0..10 {
            let tests: Vec<&SplitIndices> = splits.iter().filter(|s| s.repetition == rep).collect();
            let mut all: Vec<usize> = tests.iter().flat_map(|s| s.test.clone()).collect();
            all.sort_unstable();
            assert_eq!(all, (0..ds.len()).collect::<Vec<_>>());
        }
        for s in &splits {
            let mut all: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..ds.len()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn split_is_stratified() {
        let ds = blocks(&[61, 24, 15]);
        let plan = SplitPlan { fold_count: 3, repetitions: 2, validation_fraction: 0.3, seed: 11 };
        for s in split_indices(ds.labels(), 3, &plan).unwrap() {
            for (c, &n_c) in ds.class_counts().iter().enumerate() {
                let in_fold = s.test.iter().filter(|&&i| ds.labels()[i] == c).count() as f64;
                let expected = n_c as f64 / 3.0;
                assert!((in_fold - expected).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn split_rejects_small_class() {
        let ds = blocks(&[10, 1]);
        let err = split(&ds, &SplitPlan::default()).unwrap_err();
        assert!(err.to_string().contains("class 1"));
    }

    #[test]
    fn split_deterministic() {
        let ds = blocks(&[50, 10]);
        let plan = SplitPlan::default();
        assert_eq!(split_indices(ds.labels(), 2, &plan).unwrap(), split_indices(ds.labels(), 2, &plan).unwrap());
    }

    #[test]
    fn standardizer_zero_mean_unit_var() {
        let ds = blocks(&[5, 5]);
        let z = Standardizer::fit(ds.features());
        let t = z.transform(ds.features()).unwrap();
        let mean: f64 = t.as_slice().iter().sum::<f64>() / 10.0;
        let var: f64 = t.as_slice().iter().map(|v| v * v).sum::<f64>() / 10.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);
    }
}
