//! Imbalance-aware evaluation: confusion matrix, g-mean over per-class
//! recalls, per-class Brier scores on the true-class probability and their
//! unweighted mean (balanced Brier score).

use std::fmt;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// How per-class Brier scores are defined for more than two classes.
/// Written into experiment metadata.
pub const MULTICLASS_BRIER_NOTE: &str =
    "per-class Brier BS_j = mean over instances of class j of (1 - p_true)^2; binary form equals BS+/BS-";

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport<T> {
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub per_class_recall: Vec<T>,
    pub gmean: T,
    pub per_class_brier: Vec<T>,
    pub bbs: T,
    pub brier_overall: T,
    pub n_evaluated: usize,
}

/// Scores `probs` (rows are class distributions) against hard `labels`.
///
/// Predictions are the row argmax with ties going to the lowest class. Every
/// class must have at least one instance, since its Brier score divides by
/// the class count.
pub fn evaluate<T: Scalar>(probs: &Matrix<T>, labels: &[usize]) -> Result<MetricsReport<T>> {
    let (n, c) = probs.shape();
    if n != labels.len() {
        return Err(Error::invalid(format!("{n} probability rows but {} labels", labels.len())));
    }
    if c < 2 {
        return Err(Error::invalid("need at least two classes"));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
        return Err(Error::invalid(format!("label {bad} out of range 0..{c}")));
    }
    let mut confusion = vec![vec![0usize; c]; c];
    let mut brier_sum = vec![T::zero(); c];
    for (i, &y) in labels.iter().enumerate() {
        confusion[y][probs.argmax_row(i)] += 1;
        let miss = T::one() - probs[(i, y)];
        brier_sum[y] += miss * miss;
    }
    let counts: Vec<usize> = confusion.iter().map(|row| row.iter().sum()).collect();
    if let Some(class) = counts.iter().position(|&k| k == 0) {
        return Err(Error::EmptyClass { class });
    }
    let per_class_recall: Vec<T> = (0..c).map(|k| T::from_count(confusion[k][k]) / T::from_count(counts[k])).collect();
    let gmean = if c == 2 {
        (per_class_recall[0] * per_class_recall[1]).sqrt()
    } else {
        let prod = per_class_recall.iter().fold(T::one(), |acc, &r| acc * r);
        prod.powf(T::one() / T::from_count(c))
    };
    let per_class_brier: Vec<T> = brier_sum.iter().zip(&counts).map(|(&s, &k)| s / T::from_count(k)).collect();
    let bbs = per_class_brier.iter().copied().sum::<T>() / T::from_count(c);
    let brier_overall = brier_sum.iter().copied().sum::<T>() / T::from_count(n);
    Ok(MetricsReport { confusion, per_class_recall, gmean, per_class_brier, bbs, brier_overall, n_evaluated: n })
}

impl<T: Scalar> MetricsReport<T> {
    pub fn n_classes(&self) -> usize {
        self.confusion.len()
    }

    /// Column names of [`Self::csv_fields`]:
    /// `n_evaluated,gmean,bbs,brier_overall,recall_0..,brier_0..,cm_t_p..`
    /// with the confusion matrix flattened row-major (`cm_{true}_{pred}`).
    pub fn csv_header(n_classes: usize) -> Vec<String> {
        let mut h: Vec<String> =
            ["n_evaluated", "gmean", "bbs", "brier_overall"].iter().map(|s| s.to_string()).collect();
        h.extend((0..n_classes).map(|c| format!("recall_{c}")));
        h.extend((0..n_classes).map(|c| format!("brier_{c}")));
        for t in 0..n_classes {
            h.extend((0..n_classes).map(|p| format!("cm_{t}_{p}")));
        }
        h
    }

    pub fn csv_fields(&self) -> Vec<String> {
        let mut f = vec![
            self.n_evaluated.to_string(),
            self.gmean.to_string(),
            self.bbs.to_string(),
            self.brier_overall.to_string(),
        ];
        f.extend(self.per_class_recall.iter().map(|v| v.to_string()));
        f.extend(self.per_class_brier.iter().map(|v| v.to_string()));
        for row in &self.confusion {
            f.extend(row.iter().map(|v| v.to_string()));
        }
        f
    }

    pub fn to_f64(&self) -> MetricsReport<f64> {
        MetricsReport {
            confusion: self.confusion.clone(),
            per_class_recall: self.per_class_recall.iter().map(|v| v.as_f64()).collect(),
            gmean: self.gmean.as_f64(),
            per_class_brier: self.per_class_brier.iter().map(|v| v.as_f64()).collect(),
            bbs: self.bbs.as_f64(),
            brier_overall: self.brier_overall.as_f64(),
            n_evaluated: self.n_evaluated,
        }
    }
}

impl<T: Scalar> fmt::Display for MetricsReport<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "instances      {}", self.n_evaluated)?;
        writeln!(f, "g-mean         {:.6}", self.gmean)?;
        writeln!(f, "balanced Brier {:.6}", self.bbs)?;
        writeln!(f, "overall Brier  {:.6}", self.brier_overall)?;
        writeln!(f, "class  count  recall    brier")?;
        for (c, row) in self.confusion.iter().enumerate() {
            writeln!(
                f,
                "{c:>5}  {:>5}  {:.6}  {:.6}",
                row.iter().sum::<usize>(),
                self.per_class_recall[c],
                self.per_class_brier[c]
            )?;
        }
        writeln!(f, "confusion (rows = true class)")?;
        for row in &self.confusion {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:>6}")).collect();
            writeln!(f, "{}", cells.join(""))?;
        }
        Ok(())
    }
}

/// `(GM gain, BBS gain)` of a method over the baseline on the same split;
/// positive means the method is better on that metric.
pub fn gain<T: Scalar>(method: &MetricsReport<T>, baseline: &MetricsReport<T>) -> (T, T) {
    (method.gmean - baseline.gmean, baseline.bbs - method.bbs)
}

/// Ranks with 1 = best; tied scores share their average rank.
pub fn rank_methods(scores: &[f64], higher_is_better: bool) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let ord = scores[a].partial_cmp(&scores[b]).unwrap_or(std::cmp::Ordering::Equal);
        if higher_is_better {
            ord.reverse()
        } else {
            ord
        }
    });
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) hold ranks i+1..=j
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probs(rows: &[[f64; 2]]) -> Matrix<f64> {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn perfect_predictions() {
        let p = probs(&[[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]);
        let r = evaluate(&p, &[0, 1, 0]).unwrap();
        assert_eq!(r.gmean, 1.0);
        assert_eq!(r.bbs, 0.0);
        assert_eq!(r.brier_overall, 0.0);
    }

    #[test]
    fn uniform_binary() {
        let p = probs(&[[0.5, 0.5]; 4]);
        let r = evaluate(&p, &[0, 0, 1, 1]).unwrap();
        assert_eq!(r.per_class_brier, vec![0.25, 0.25]);
        assert_eq!(r.bbs, 0.25);
        // ties predict class 0, so class 1 recall is 0
        assert_eq!(r.per_class_recall, vec![1.0, 0.0]);
        assert_eq!(r.gmean, 0.0);
    }

    #[test]
    fn gmean_from_rates() {
        // class 1 (positive): 4 of 5 correct; class 0: 1 of 2 correct
        let p = probs(&[[0.2, 0.8], [0.2, 0.8], [0.2, 0.8], [0.2, 0.8], [0.9, 0.1], [0.9, 0.1], [0.3, 0.7]]);
        let r = evaluate(&p, &[1, 1, 1, 1, 1, 0, 0]).unwrap();
        assert!((r.gmean - 0.4f64.sqrt()).abs() < 1e-9);
        assert!((r.gmean - 0.632_455_532).abs() < 1e-9);
    }

    #[test]
    fn empty_class_errors() {
        let p = probs(&[[0.5, 0.5], [0.7, 0.3]]);
        assert!(matches!(evaluate(&p, &[0, 0]), Err(Error::EmptyClass { class: 1 })));
    }

    #[test]
    fn confusion_rows_match_counts() {
        let p = Matrix::from_rows(&[[0.6, 0.3, 0.1], [0.1, 0.1, 0.8], [0.2, 0.7, 0.1], [0.3, 0.3, 0.4]]).unwrap();
        let r = evaluate(&p, &[0, 2, 1, 2]).unwrap();
        assert_eq!(r.confusion, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 2]]);
        assert_eq!(r.gmean, 1.0);
    }

    #[test]
    fn gains() {
        let mut a = evaluate(&probs(&[[1.0, 0.0], [0.0, 1.0]]), &[0, 1]).unwrap();
        let mut b = a.clone();
        assert_eq!(gain(&a, &b), (0.0, 0.0));
        a.gmean = 0.9;
        a.bbs = 0.05;
        b.gmean = 0.8;
        b.bbs = 0.10;
        let (g, c) = gain(&a, &b);
        assert!((g - 0.1).abs() < 1e-12 && (c - 0.05).abs() < 1e-12);
        let (g2, c2) = gain(&b, &a);
        assert_eq!((g2, c2), (-g, -c));
    }

    #[test]
    fn ranks() {
        assert_eq!(rank_methods(&[0.9, 0.7, 0.8], true), vec![1.0, 3.0, 2.0]);
        assert_eq!(rank_methods(&[0.1, 0.1, 0.3], false), vec![1.5, 1.5, 3.0]);
        assert_eq!(rank_methods(&[0.4; 4], true), vec![2.5; 4]);
    }

    #[test]
    fn csv_header_matches_fields() {
        let r = evaluate(&probs(&[[0.6, 0.4], [0.3, 0.7]]), &[0, 1]).unwrap();
        assert_eq!(MetricsReport::<f64>::csv_header(2).len(), r.csv_fields().len());
    }
}
