use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

use super::Batch;

/// Shuffled per-class queues over a whole training set. Used to fill classes
/// missing from an incoming mini-batch; each queue is reshuffled once drained.
#[derive(Debug, Clone)]
pub struct ClassReservoir {
    pools: Vec<Vec<usize>>,
    cursors: Vec<usize>,
}

impl ClassReservoir {
    pub fn new<R: Rng + ?Sized>(labels: &[usize], n_classes: usize, rng: &mut R) -> Result<Self> {
        let mut pools = vec![Vec::new(); n_classes];
        for (i, &y) in labels.iter().enumerate() {
            pools[y].push(i);
        }
        if let Some(c) = pools.iter().position(Vec::is_empty) {
            return Err(Error::invalid(format!("class {c} has no instances; cannot build a balanced batch")));
        }
        for pool in &mut pools {
            pool.shuffle(rng);
        }
        Ok(Self { cursors: vec![0; n_classes], pools })
    }

    pub fn from_dataset<T: Scalar, R: Rng + ?Sized>(ds: &Dataset<T>, rng: &mut R) -> Result<Self> {
        Self::new(ds.labels(), ds.n_classes(), rng)
    }

    /// Next row of `class`.
    pub fn draw<R: Rng + ?Sized>(&mut self, class: usize, rng: &mut R) -> usize {
        if self.cursors[class] == self.pools[class].len() {
            self.pools[class].shuffle(rng);
            self.cursors[class] = 0;
        }
        let row = self.pools[class][self.cursors[class]];
        self.cursors[class] += 1;
        row
    }
}

/// Index form of balanced resampling.
///
/// `batch_rows` are row ids whose classes are `labels[row]`. For every class
/// `per_class` rows are drawn with replacement from the batch members of that
/// class, or from `reservoir` if the batch has none. The result is grouped by
/// class, `n_classes * per_class` long.
pub fn resample_rows<R: Rng + ?Sized>(
    batch_rows: &[usize],
    labels: &[usize],
    n_classes: usize,
    per_class: usize,
    reservoir: &mut ClassReservoir,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if per_class == 0 {
        return Err(Error::invalid("per_class must be at least 1"));
    }
    let mut members = vec![Vec::new(); n_classes];
    for &r in batch_rows {
        members[labels[r]].push(r);
    }
    let mut out = Vec::with_capacity(n_classes * per_class);
    for (class, rows) in members.iter().enumerate() {
        if rows.is_empty() {
            out.extend((0..per_class).map(|_| reservoir.draw(class, rng)));
        } else {
            out.extend((0..per_class).map(|_| rows[rng.random_range(0..rows.len())]));
        }
    }
    Ok(out)
}

/// Balanced resampling of a one-hot labelled batch.
///
/// Row classes are read from the argmax of `y`. Classes absent from the batch
/// are filled from `fallback` (a dataset plus its reservoir); without one an
/// absent class is an error.
pub fn balanced_resample<T: Scalar, R: Rng + ?Sized>(
    x: &Matrix<T>,
    y: &Matrix<T>,
    per_class: usize,
    fallback: Option<(&Dataset<T>, &mut ClassReservoir)>,
    rng: &mut R,
) -> Result<(Matrix<T>, Matrix<T>)> {
    if x.rows() != y.rows() {
        return Err(Error::invalid("feature and label row counts differ"));
    }
    if per_class == 0 {
        return Err(Error::invalid("per_class must be at least 1"));
    }
    let n_classes = y.cols();
    let labels: Vec<usize> = (0..y.rows()).map(|i| y.argmax_row(i)).collect();
    let mut members = vec![Vec::new(); n_classes];
    for (i, &c) in labels.iter().enumerate() {
        members[c].push(i);
    }
    let mut xs = Vec::with_capacity(n_classes * per_class * x.cols());
    let mut ys = Vec::with_capacity(n_classes * per_class);
    let mut fallback = fallback;
    for (class, rows) in members.iter().enumerate() {
        for _ in 0..per_class {
            if rows.is_empty() {
                let (ds, reservoir) = fallback
                    .as_mut()
                    .ok_or_else(|| Error::invalid(format!("class {class} is absent from the batch")))?;
                let r = reservoir.draw(class, rng);
                xs.extend_from_slice(ds.features().row(r));
            } else {
                let r = rows[rng.random_range(0..rows.len())];
                xs.extend_from_slice(x.row(r));
            }
            ys.push(class);
        }
    }
    Ok((Matrix::from_vec(ys.len(), x.cols(), xs)?, Matrix::one_hot(&ys, n_classes)))
}

/// Convex combination `λ·row_i + (1-λ)·row_perm[i]` of features and labels.
pub fn mix<T: Scalar>(x: &Matrix<T>, y: &Matrix<T>, lambda: T, perm: &[usize]) -> Result<Batch<T>> {
    if !(lambda >= T::zero() && lambda <= T::one()) {
        return Err(Error::invalid(format!("mixing weight {lambda} outside [0, 1]")));
    }
    let n = x.rows();
    if y.rows() != n || perm.len() != n {
        return Err(Error::invalid("mix inputs disagree on batch size"));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::invalid("perm is not a permutation of the batch"));
        }
        seen[p] = true;
    }
    let rest = T::one() - lambda;
    let blend = |m: &Matrix<T>| {
        let mut out = Matrix::zeros(n, m.cols());
        for (i, &j) in perm.iter().enumerate() {
            let (a, b) = (m.row(i), m.row(j));
            for (o, (&u, &v)) in out.row_mut(i).iter_mut().zip(a.iter().zip(b)) {
                // clamp away rounding overshoot so the result stays between its parents
                *o = (lambda * u + rest * v).max(u.min(v)).min(u.max(v));
            }
        }
        out
    };
    Batch::new(blend(x), blend(y), vec![T::one(); n])
}
