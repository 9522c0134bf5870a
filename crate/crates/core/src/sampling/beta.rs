//! Beta(α, α) mixing weights from a ratio of two Gamma draws.

use rand::Rng;
use rand_distr::{Open01, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Natural log of a Gamma(shape, 1) draw.
///
/// Shapes `>= 1` use Marsaglia and Tsang's squeeze method. Smaller shapes are
/// boosted: `G(a) = G(a + 1) * U^(1/a)`, evaluated in log space so that tiny
/// shapes do not underflow to zero.
pub fn ln_gamma_draw<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    debug_assert!(shape > 0.0);
    if shape < 1.0 {
        let u: f64 = rng.sample(Open01);
        return ln_gamma_draw(shape + 1.0, rng) + u.ln() / shape;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u: f64 = rng.sample(Open01);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d.ln() + v.ln();
        }
    }
}

/// Draws the mixing weight λ ~ Beta(α, α).
///
/// `alpha == 0` returns exactly 1 (no mixing).
pub fn sample_beta<T: Scalar, R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<T> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::invalid(format!("beta parameter {alpha} must be >= 0")));
    }
    if alpha == 0.0 {
        return Ok(T::one());
    }
    let ln_x = ln_gamma_draw(alpha, rng);
    let ln_y = ln_gamma_draw(alpha, rng);
    // x / (x + y) without leaving log space
    let lambda = 1.0 / (1.0 + (ln_y - ln_x).exp());
    Ok(T::lit(lambda.clamp(0.0, 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    fn moments(alpha: f64, n: usize, seed: u64) -> (f64, f64) {
        let mut rng = seeded_rng(seed);
        let xs: Vec<f64> = (0..n).map(|_| sample_beta(alpha, &mut rng).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        (mean, var)
    }

    #[test]
    fn alpha_zero_is_one() {
        let mut rng = seeded_rng(1);
        for _ in 0..100 {
            assert_eq!(sample_beta::<f64, _>(0.0, &mut rng).unwrap(), 1.0);
        }
    }

    #[test]
    fn negative_alpha_rejected() {
        let mut rng = seeded_rng(1);
        assert!(sample_beta::<f64, _>(-0.1, &mut rng).is_err());
        assert!(sample_beta::<f64, _>(f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn uniform_mean() {
        let (mean, var) = moments(1.0, 100_000, 3);
        assert!((mean - 0.5).abs() < 0.01);
        assert!((var - 1.0 / 12.0).abs() < 0.01);
    }

    #[test]
    fn small_alpha_variance() {
        let (_, var) = moments(0.3, 100_000, 4);
        assert!((var - 0.15625).abs() < 0.01, "{var}");
    }

    #[test]
    fn tiny_alpha_stays_finite() {
        let mut rng = seeded_rng(9);
        for _ in 0..10_000 {
            let l: f64 = sample_beta(0.01, &mut rng).unwrap();
            assert!((0.0..=1.0).contains(&l));
        }
    }

    #[test]
    fn gamma_mean_matches_shape() {
        let mut rng = seeded_rng(5);
        for shape in [0.2, 1.0, 3.5] {
            let n = 50_000;
            let mean = (0..n).map(|_| ln_gamma_draw(shape, &mut rng).exp()).sum::<f64>() / n as f64;
            assert!((mean - shape).abs() < 0.05 * shape.max(1.0), "{shape}: {mean}");
        }
    }
}
