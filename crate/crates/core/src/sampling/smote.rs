//! In-batch SMOTE: classes below the balanced target are topped up with
//! interpolations between same-class batch members, classes above it are
//! randomly undersampled.

use rand::seq::index;
use rand::Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::resample::ClassReservoir;

/// One generated sample: `seed + u * (neighbour - seed)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic<T> {
    /// Position of the sample in the emitted batch.
    pub position: usize,
    pub seed_row: usize,
    pub neighbour_row: usize,
    pub u: T,
}

/// Linear interpolation between two points.
pub fn interpolate<T: Scalar>(seed: &[T], neighbour: &[T], u: T) -> Vec<T> {
    seed.iter().zip(neighbour).map(|(&a, &b)| a + u * (b - a)).collect()
}

/// Indices (into `candidates`) of the `k` points nearest to `origin` by
/// Euclidean distance, excluding `origin` itself. Brute force; ties keep
/// candidate order.
pub fn nearest_neighbours<T: Scalar>(ds: &Dataset<T>, origin: usize, candidates: &[usize], k: usize) -> Vec<usize> {
    let x = ds.features().row(origin);
    let mut dist: Vec<(T, usize)> = candidates
        .iter()
        .filter(|&&r| r != origin)
        .map(|&r| {
            let d = ds.features().row(r).iter().zip(x).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>();
            (d, r)
        })
        .collect();
    dist.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    dist.into_iter().take(k).map(|(_, r)| r).collect()
}

pub(crate) struct SmoteOutput<T> {
    pub features: Vec<T>,
    pub labels: Vec<usize>,
    /// Source row of every non-synthetic output position.
    pub origins: Vec<Option<usize>>,
    pub synthetics: Vec<Synthetic<T>>,
}

pub(crate) fn smote_rows<T: Scalar, R: Rng + ?Sized>(
    ds: &Dataset<T>,
    batch_rows: &[usize],
    target: usize,
    k_neighbors: usize,
    reservoir: &mut ClassReservoir,
    rng: &mut R,
) -> Result<SmoteOutput<T>> {
    if k_neighbors == 0 {
        return Err(Error::invalid("k_neighbors must be at least 1"));
    }
    if target == 0 {
        return Err(Error::invalid("balanced per-class target must be at least 1"));
    }
    let n_classes = ds.n_classes();
    let d = ds.n_features();
    let mut members = vec![Vec::new(); n_classes];
    for &r in batch_rows {
        members[ds.labels()[r]].push(r);
    }
    let mut out = SmoteOutput {
        features: Vec::with_capacity(n_classes * target * d),
        labels: Vec::with_capacity(n_classes * target),
        origins: Vec::with_capacity(n_classes * target),
        synthetics: Vec::new(),
    };
    let push_real = |out: &mut SmoteOutput<T>, row: usize, class: usize| {
        out.features.extend_from_slice(ds.features().row(row));
        out.labels.push(class);
        out.origins.push(Some(row));
    };
    for (class, rows) in members.iter().enumerate() {
        let m = rows.len();
        if m == 0 {
            for _ in 0..target {
                let r = reservoir.draw(class, rng);
                push_real(&mut out, r, class);
            }
        } else if m >= target {
            for i in index::sample(rng, m, target).into_iter() {
                push_real(&mut out, rows[i], class);
            }
        } else {
            for &r in rows {
                push_real(&mut out, r, class);
            }
            let k = k_neighbors.min(m - 1);
            for _ in m..target {
                let seed_row = rows[rng.random_range(0..m)];
                let (neighbour_row, u) = if k == 0 {
                    (seed_row, T::zero())
                } else {
                    let nn = nearest_neighbours(ds, seed_row, rows, k);
                    let pick = nn[rng.random_range(0..nn.len())];
                    (pick, T::lit(rng.random::<f64>()))
                };
                let s = interpolate(ds.features().row(seed_row), ds.features().row(neighbour_row), u);
                out.synthetics.push(Synthetic { position: out.labels.len(), seed_row, neighbour_row, u });
                out.features.extend_from_slice(&s);
                out.labels.push(class);
                out.origins.push(None);
            }
        }
    }
    Ok(out)
}
