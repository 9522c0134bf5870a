//! Decision-surface grids and kernel density tables of mixed samples.

use std::fmt::Write as _;
use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::network::Network;
use crate::sampling::{Sampler, SamplerSpec};
use crate::scalar::Scalar;

pub const KDE_GRID_POINTS: usize = 256;

/// Class probabilities on a regular 2-D grid; rows are
/// `x1, x2, p_0, .., p_{C-1}` with `x1` varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGrid<T> {
    pub resolution: usize,
    pub n_classes: usize,
    pub rows: Matrix<T>,
}

impl<T: Scalar> SurfaceGrid<T> {
    /// Fraction of grid points where `class` has probability above 0.5.
    pub fn area_fraction(&self, class: usize) -> f64 {
        let hits = self.rows.iter_rows().filter(|r| r[2 + class] > T::lit(0.5)).count();
        hits as f64 / self.rows.rows() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x1,x2");
        for c in 0..self.n_classes {
            let _ = write!(out, ",p_{c}");
        }
        out.push('\n');
        for r in self.rows.iter_rows() {
            let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Evaluates `net` on a `resolution x resolution` grid spanning the data
/// bounding box widened by `margin` on every side.
pub fn export_surface<T: Scalar>(
    net: &Network<T>,
    ds: &Dataset<T>,
    resolution: usize,
    margin: f64,
) -> Result<SurfaceGrid<T>> {
    if ds.n_features() != 2 {
        return Err(Error::invalid(format!("decision surfaces need 2-D data, got {} features", ds.n_features())));
    }
    if resolution == 0 || margin.is_nan() || margin < 0.0 {
        return Err(Error::invalid("resolution must be positive and margin nonnegative"));
    }
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for r in ds.features().iter_rows() {
        for j in 0..2 {
            lo[j] = lo[j].min(r[j].as_f64());
            hi[j] = hi[j].max(r[j].as_f64());
        }
    }
    let xs = linspace(lo[0] - margin, hi[0] + margin, resolution);
    let ys = linspace(lo[1] - margin, hi[1] + margin, resolution);
    let mut points = Vec::with_capacity(resolution * resolution * 2);
    for &y in &ys {
        for &x in &xs {
            points.push(T::lit(x));
            points.push(T::lit(y));
        }
    }
    let points = Matrix::from_vec(resolution * resolution, 2, points)?;
    let probs = net.predict(&points)?;
    let c = probs.cols();
    let mut rows = Matrix::zeros(points.rows(), 2 + c);
    for i in 0..points.rows() {
        let out = rows.row_mut(i);
        out[..2].copy_from_slice(points.row(i));
        out[2..].copy_from_slice(probs.row(i));
    }
    Ok(SurfaceGrid { resolution, n_classes: c, rows })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Silverman's rule of thumb.
    Auto,
    Fixed(f64),
}

impl std::str::FromStr for Bandwidth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Bandwidth::Auto);
        }
        match s.parse::<f64>() {
            Ok(h) if h > 0.0 && h.is_finite() => Ok(Bandwidth::Fixed(h)),
            _ => Err(Error::invalid(format!("bandwidth {s:?} must be \"auto\" or a positive real"))),
        }
    }
}

/// `0.9 * min(σ, IQR / 1.34) * n^(-1/5)`, falling back to σ when the IQR
/// is zero and to `1e-3` for constant samples.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 1e-3;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let sd = (samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64).sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let quantile = |q: f64| {
        let pos = q * (n - 1) as f64;
        let (i, frac) = (pos.floor() as usize, pos.fract());
        if i + 1 < n {
            sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
        } else {
            sorted[n - 1]
        }
    };
    let iqr = quantile(0.75) - quantile(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * (n as f64).powf(-0.2);
    if h > 0.0 && h.is_finite() {
        h
    } else {
        1e-3
    }
}

/// Gaussian kernel density estimate sampled on a regular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeTable {
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

impl KdeTable {
    /// Density on `KDE_GRID_POINTS` points over `[min - 3h, max + 3h]`.
    pub fn fit(samples: &[f64], bandwidth: Bandwidth) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("KDE of an empty sample"));
        }
        let h = match bandwidth {
            Bandwidth::Auto => silverman_bandwidth(samples),
            Bandwidth::Fixed(h) => h,
        };
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let (lo, hi) = (sorted[0] - 3.0 * h, sorted[sorted.len() - 1] + 3.0 * h);
        let grid = linspace(lo, hi, KDE_GRID_POINTS);
        let norm = 1.0 / (samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
        let cutoff = 8.0 * h;
        let density = grid
            .iter()
            .map(|&g| {
                // contributions beyond 8h are below 1e-14 of the peak
                let start = sorted.partition_point(|&x| x < g - cutoff);
                let end = sorted.partition_point(|&x| x <= g + cutoff);
                let s: f64 = sorted[start..end]
                    .iter()
                    .map(|&x| {
                        let z = (g - x) / h;
                        (-0.5 * z * z).exp()
                    })
                    .sum();
                s * norm
            })
            .collect();
        Ok(Self { bandwidth: h, grid, density })
    }

    /// Trapezoidal integral of the density over the grid.
    pub fn integral(&self) -> f64 {
        self.grid.windows(2).zip(self.density.windows(2)).map(|(x, d)| 0.5 * (x[1] - x[0]) * (d[0] + d[1])).sum()
    }

    pub fn to_csv(&self, value_name: &str) -> String {
        let mut out = format!("{value_name},density\n");
        for (x, d) in self.grid.iter().zip(&self.density) {
            let _ = writeln!(out, "{x},{d}");
        }
        out
    }

    pub fn write_csv(&self, path: &Path, value_name: &str) -> Result<()> {
        std::fs::write(path, self.to_csv(value_name)).map_err(|e| Error::io(path, e))
    }
}

/// Mixed samples collected from a sampler together with their densities.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedDistribution {
    pub minority_class: usize,
    pub feature_values: Vec<f64>,
    /// Soft-label mass each sample assigns to the minority class.
    pub label_values: Vec<f64>,
    pub features: KdeTable,
    pub labels: KdeTable,
}

/// Draws `n_batches` batches from a sampler over a 1-D dataset and
/// estimates the densities of mixed feature values and of the minority
/// class soft-label values.
pub fn export_mixed_distribution<T: Scalar>(
    ds: &Dataset<T>,
    spec: &SamplerSpec,
    n_batches: usize,
    bandwidth: Bandwidth,
) -> Result<MixedDistribution> {
    if ds.n_features() != 1 {
        return Err(Error::invalid(format!(
            "mixed-distribution export needs 1-D data, got {} features",
            ds.n_features()
        )));
    }
    if n_batches == 0 {
        return Err(Error::invalid("n_batches must be positive"));
    }
    let minority_class = ds.minority_class();
    let mut sampler = Sampler::new(ds, *spec)?;
    let mut feature_values = Vec::new();
    let mut label_values = Vec::new();
    for _ in 0..n_batches {
        let b = sampler.next_batch()?;
        feature_values.extend(b.features().as_slice().iter().map(|v| v.as_f64()));
        label_values.extend(b.soft_labels().iter_rows().map(|r| r[minority_class].as_f64()));
    }
    Ok(MixedDistribution {
        minority_class,
        features: KdeTable::fit(&feature_values, bandwidth)?,
        labels: KdeTable::fit(&label_values, bandwidth)?,
        feature_values,
        label_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_ring, make_two_gaussians};
    use crate::sampling::Strategy;

    #[test]
    fn surface_grid_shape_and_corners() {
        let ds = make_ring::<f64>(30, 10, 0.2, 1).unwrap();
        let net = Network::<f64>::new(&[2, 4, 2], 0.0, 1).unwrap();
        let g = export_surface(&net, &ds, 3, 0.0).unwrap();
        assert_eq!(g.rows.rows(), 9);
        for r in g.rows.iter_rows() {
            assert!((r[2] + r[3] - 1.0).abs() < 1e-9);
        }
        let min_x = ds.features().iter_rows().map(|r| r[0]).fold(f64::INFINITY, f64::min);
        let max_y = ds.features().iter_rows().map(|r| r[1]).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(g.rows[(0, 0)], min_x);
        assert_eq!(g.rows[(8, 1)], max_y);
    }

    #[test]
    fn surface_rejects_non_2d() {
        let ds = make_two_gaussians::<f64>(10, 10, 3, 1.0, 1).unwrap();
        let net = Network::<f64>::new(&[3, 2], 0.0, 1).unwrap();
        assert!(export_surface(&net, &ds, 3, 0.0).is_err());
    }

    #[test]
    fn kde_integrates_to_one() {
        let ds = make_two_gaussians::<f64>(300, 30, 1, 2.0, 4).unwrap();
        let spec = SamplerSpec { strategy: Strategy::Remix, batch_size: 32, alpha: 0.3, ..SamplerSpec::default() };
        let m = export_mixed_distribution(&ds, &spec, 50, Bandwidth::Auto).unwrap();
        assert_eq!(m.minority_class, 1);
        assert!((m.features.integral() - 1.0).abs() < 1e-3);
        assert!((m.labels.integral() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn kde_rejects_2d() {
        let ds = make_ring::<f64>(10, 10, 0.1, 1).unwrap();
        assert!(export_mixed_distribution(&ds, &SamplerSpec::default(), 1, Bandwidth::Auto).is_err());
    }

    #[test]
    fn silverman_normal_sample() {
        // σ = IQR/1.34 ≈ 1 for N(0,1): h ≈ 0.9 n^-0.2
        let mut rng = crate::seeded_rng(2);
        let xs: Vec<f64> = (0..10_000).map(|_| rand::Rng::sample(&mut rng, rand_distr::StandardNormal)).collect();
        let h = silverman_bandwidth(&xs);
        let expected = 0.9 * 10_000f64.powf(-0.2);
        assert!((h - expected).abs() < 0.05 * expected, "{h} vs {expected}");
    }

    #[test]
    fn bandwidth_parse() {
        assert_eq!("auto".parse::<Bandwidth>().unwrap(), Bandwidth::Auto);
        assert_eq!("0.2".parse::<Bandwidth>().unwrap(), Bandwidth::Fixed(0.2));
        assert!("-1".parse::<Bandwidth>().is_err());
    }
}
