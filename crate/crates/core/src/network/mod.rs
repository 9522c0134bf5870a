//! Dense ReLU classifier with inverted dropout on hidden activations and a
//! softmax output, trained on soft labels with (optionally instance
//! weighted) cross-entropy and Adam.

mod adam;
mod checkpoint;
mod train;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::{seeded_rng, Rng};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use train::{train, EpochRecord, History, TrainConfig, ValidationLoss};

/// Added inside the log of the cross-entropy.
pub const LOG_EPSILON: f64 = 1e-12;

pub const DEFAULT_HIDDEN: [usize; 3] = [64, 64, 32];

/// One fully connected layer; `weights` is `out x in`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weights: Matrix<T>,
    pub biases: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self { weights: Matrix::zeros(n_out, n_in), biases: vec![T::zero(); n_out] }
    }

    /// `out = a Wᵀ + b`.
    fn apply(&self, a: &Matrix<T>) -> Matrix<T> {
        let n_out = self.weights.rows();
        let mut z = Matrix::zeros(a.rows(), n_out);
        for i in 0..a.rows() {
            let x = a.row(i);
            let out = z.row_mut(i);
            for (o, slot) in out.iter_mut().enumerate() {
                let w = self.weights.row(o);
                let mut acc = self.biases[o];
                for (&wi, &xi) in w.iter().zip(x) {
                    acc += wi * xi;
                }
                *slot = acc;
            }
        }
        z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    layer_dims: Vec<usize>,
    layers: Vec<Dense<T>>,
    dropout: T,
}

/// Activations kept from a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    input: Matrix<T>,
    /// ReLU outputs of each hidden layer before dropout.
    hidden: Vec<Matrix<T>>,
    /// Dropout scale per hidden unit (`0` or `1/(1-p)`); `None` in eval mode.
    masks: Vec<Option<Matrix<T>>>,
    pub probs: Matrix<T>,
}

/// Gradients with the same shapes as the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Dense<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(net: &Network<T>) -> Self {
        Self { layers: net.layers.iter().map(|l| Dense::zeros(l.weights.cols(), l.weights.rows())).collect() }
    }

    /// Flattened in [`Network::parameters`] order.
    pub fn flatten(&self) -> Vec<T> {
        flatten_layers(&self.layers)
    }

    pub fn norm(&self) -> T {
        self.flatten().iter().map(|&g| g * g).sum::<T>().sqrt()
    }
}

fn flatten_layers<T: Scalar>(layers: &[Dense<T>]) -> Vec<T> {
    let mut out = Vec::new();
    for l in layers {
        out.extend_from_slice(l.weights.as_slice());
        out.extend_from_slice(&l.biases);
    }
    out
}

fn softmax_rows<T: Scalar>(z: &mut Matrix<T>) {
    for i in 0..z.rows() {
        let row = z.row_mut(i);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

impl<T: Scalar> Network<T> {
    fn check_dims(layer_dims: &[usize], dropout: f64) -> Result<()> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(Error::invalid(format!("invalid layer dimensions {layer_dims:?}")));
        }
        if *layer_dims.last().unwrap() < 2 {
            return Err(Error::invalid("output layer needs at least two classes"));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::invalid(format!("dropout rate {dropout} outside [0, 1)")));
        }
        Ok(())
    }

    /// He-uniform weights (`U(±sqrt(6 / fan_in))`) and zero biases.
    pub fn new(layer_dims: &[usize], dropout: f64, seed: u64) -> Result<Self> {
        Self::check_dims(layer_dims, dropout)?;
        let mut rng = seeded_rng(seed);
        let layers = layer_dims
            .windows(2)
            .map(|w| {
                let (n_in, n_out) = (w[0], w[1]);
                let limit = (6.0 / n_in as f64).sqrt();
                let mut layer = Dense::zeros(n_in, n_out);
                for v in layer.weights.as_mut_slice() {
                    *v = T::lit(rng.random_range(-limit..limit));
                }
                layer
            })
            .collect();
        Ok(Self { layer_dims: layer_dims.to_vec(), layers, dropout: T::lit(dropout) })
    }

    pub fn zeros(layer_dims: &[usize], dropout: f64) -> Result<Self> {
        Self::check_dims(layer_dims, dropout)?;
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            layers: layer_dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
            dropout: T::lit(dropout),
        })
    }

    /// Rebuilds a network from explicit layers, checking the shape chain.
    pub fn from_layers(layers: Vec<Dense<T>>, dropout: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("network needs at least one layer"));
        }
        let mut dims = vec![layers[0].weights.cols()];
        for l in &layers {
            if l.weights.cols() != *dims.last().unwrap() || l.biases.len() != l.weights.rows() {
                return Err(Error::invalid("layer shapes do not chain"));
            }
            dims.push(l.weights.rows());
        }
        Self::check_dims(&dims, dropout)?;
        Ok(Self { layer_dims: dims, layers, dropout: T::lit(dropout) })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    pub fn dropout(&self) -> T {
        self.dropout
    }

    pub fn set_dropout(&mut self, rate: f64) -> Result<()> {
        Self::check_dims(&self.layer_dims, rate)?;
        self.dropout = T::lit(rate);
        Ok(())
    }

    pub fn n_inputs(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn n_classes(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    /// All weights and biases, layer by layer (weights row-major, then biases).
    pub fn parameters(&self) -> Vec<T> {
        flatten_layers(&self.layers)
    }

    pub fn n_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.as_slice().len() + l.biases.len()).sum()
    }

    pub fn set_parameters(&mut self, params: &[T]) -> Result<()> {
        if params.len() != self.n_parameters() {
            return Err(Error::invalid(format!("expected {} parameters, got {}", self.n_parameters(), params.len())));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.weights.as_slice().len();
            l.weights.as_mut_slice().copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.is_finite() && l.biases.iter().all(|b| b.is_finite()))
    }

    /// Forward pass keeping intermediate activations. Dropout is applied when
    /// `dropout_rng` is given (training mode); eval mode is deterministic.
    pub fn forward_cached(&self, x: &Matrix<T>, dropout_rng: Option<&mut Rng>) -> Result<ForwardCache<T>> {
        if x.cols() != self.n_inputs() {
            return Err(Error::invalid(format!(
                "input has {} features, network expects {}",
                x.cols(),
                self.n_inputs()
            )));
        }
        if !x.is_finite() {
            return Err(Error::invalid("input contains NaN or infinite values"));
        }
        let mut rng = dropout_rng.filter(|_| self.dropout > T::zero());
        let keep_scale = T::one() / (T::one() - self.dropout);
        let n_hidden = self.layers.len() - 1;
        let mut hidden = Vec::with_capacity(n_hidden);
        let mut masks = Vec::with_capacity(n_hidden);
        let mut a = x.clone();
        for layer in &self.layers[..n_hidden] {
            let mut h = layer.apply(&a);
            h.map_inplace(|v| v.max(T::zero()));
            let mask = rng.as_mut().map(|rng| {
                let p = self.dropout.as_f64();
                let mut m = Matrix::zeros(h.rows(), h.cols());
                for v in m.as_mut_slice() {
                    *v = if rng.random::<f64>() < p { T::zero() } else { keep_scale };
                }
                m
            });
            a = match &mask {
                Some(m) => {
                    let mut out = h.clone();
                    for (o, &s) in out.as_mut_slice().iter_mut().zip(m.as_slice()) {
                        *o *= s;
                    }
                    out
                }
                None => h.clone(),
            };
            hidden.push(h);
            masks.push(mask);
        }
        let mut probs = self.layers[n_hidden].apply(&a);
        softmax_rows(&mut probs);
        Ok(ForwardCache { input: x.clone(), hidden, masks, probs })
    }

    pub fn forward(&self, x: &Matrix<T>, dropout_rng: Option<&mut Rng>) -> Result<Matrix<T>> {
        Ok(self.forward_cached(x, dropout_rng)?.probs)
    }

    /// Eval-mode class probabilities.
    pub fn predict(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.forward(x, None)
    }

    /// Exact gradients of [`loss`] at the cached forward pass, reusing its
    /// dropout masks.
    pub fn backward(&self, cache: &ForwardCache<T>, soft_labels: &Matrix<T>, weights: &[T]) -> Result<Gradients<T>> {
        let (b, c) = cache.probs.shape();
        if soft_labels.shape() != (b, c) || weights.len() != b {
            return Err(Error::invalid("labels or weights do not match the forward pass"));
        }
        let inv_b = T::one() / T::from_count(b);
        let mut delta = Matrix::zeros(b, c);
        for (i, &w) in weights.iter().enumerate() {
            let scale = w * inv_b;
            let (p, y) = (cache.probs.row(i), soft_labels.row(i));
            // d/dz of -Σ y log softmax(z) is (p Σy - y); rows of y sum to 1
            let y_sum: T = y.iter().copied().sum();
            for (d, (&pk, &yk)) in delta.row_mut(i).iter_mut().zip(p.iter().zip(y)) {
                *d = scale * (pk * y_sum - yk);
            }
        }
        let mut grads = Gradients::zeros_like(self);
        for l in (0..self.layers.len()).rev() {
            let input = if l == 0 {
                cache.input.clone()
            } else {
                match &cache.masks[l - 1] {
                    Some(m) => {
                        let mut a = cache.hidden[l - 1].clone();
                        for (o, &s) in a.as_mut_slice().iter_mut().zip(m.as_slice()) {
                            *o *= s;
                        }
                        a
                    }
                    None => cache.hidden[l - 1].clone(),
                }
            };
            let g = &mut grads.layers[l];
            for i in 0..b {
                let d = delta.row(i);
                let a = input.row(i);
                for (o, &dv) in d.iter().enumerate() {
                    if dv == T::zero() {
                        continue;
                    }
                    g.biases[o] += dv;
                    for (w, &av) in g.weights.row_mut(o).iter_mut().zip(a) {
                        *w += dv * av;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.layers[l].weights;
            let mut prev = Matrix::zeros(b, w.cols());
            for i in 0..b {
                let d = delta.row(i);
                let out = prev.row_mut(i);
                for (o, &dv) in d.iter().enumerate() {
                    if dv == T::zero() {
                        continue;
                    }
                    for (p, &wv) in out.iter_mut().zip(w.row(o)) {
                        *p += dv * wv;
                    }
                }
            }
            let h = &cache.hidden[l - 1];
            let mask = cache.masks[l - 1].as_ref();
            for (k, p) in prev.as_mut_slice().iter_mut().enumerate() {
                if h.as_slice()[k] <= T::zero() {
                    *p = T::zero();
                } else if let Some(m) = mask {
                    *p *= m.as_slice()[k];
                }
            }
            delta = prev;
        }
        Ok(grads)
    }

    /// Loss and gradients of one batch.
    pub fn loss_and_gradients(
        &self,
        x: &Matrix<T>,
        soft_labels: &Matrix<T>,
        weights: &[T],
        dropout_rng: Option<&mut Rng>,
    ) -> Result<(T, Gradients<T>)> {
        let cache = self.forward_cached(x, dropout_rng)?;
        let l = loss(&cache.probs, soft_labels, weights)?;
        let g = self.backward(&cache, soft_labels, weights)?;
        Ok((l, g))
    }
}

/// Weighted batch mean of `-Σ_c y_c ln(p_c + 1e-12)`: `(1/B) Σ_i w_i l_i`.
pub fn loss<T: Scalar>(probs: &Matrix<T>, soft_labels: &Matrix<T>, weights: &[T]) -> Result<T> {
    if probs.shape() != soft_labels.shape() || weights.len() != probs.rows() {
        return Err(Error::invalid("loss inputs disagree on shape"));
    }
    if probs.rows() == 0 {
        return Err(Error::invalid("loss of an empty batch"));
    }
    let eps = T::lit(LOG_EPSILON);
    let mut total = T::zero();
    for (i, &w) in weights.iter().enumerate() {
        let ce: T = probs
            .row(i)
            .iter()
            .zip(soft_labels.row(i))
            .filter(|(_, &y)| y != T::zero())
            .map(|(&p, &y)| -y * (p + eps).ln())
            .sum();
        total += w * ce;
    }
    Ok(total / T::from_count(probs.rows()))
}

/// Cross-entropy averaged within each class, then across the classes present.
pub fn class_balanced_loss<T: Scalar>(probs: &Matrix<T>, labels: &[usize]) -> Result<T> {
    if probs.rows() != labels.len() || probs.rows() == 0 {
        return Err(Error::invalid("balanced loss inputs disagree on shape"));
    }
    let c = probs.cols();
    let eps = T::lit(LOG_EPSILON);
    let mut sums = vec![T::zero(); c];
    let mut counts = vec![0usize; c];
    for (i, &y) in labels.iter().enumerate() {
        sums[y] -= (probs[(i, y)] + eps).ln();
        counts[y] += 1;
    }
    let present: Vec<T> =
        sums.iter().zip(&counts).filter(|(_, &n)| n > 0).map(|(&s, &n)| s / T::from_count(n)).collect();
    Ok(present.iter().copied().sum::<T>() / T::from_count(present.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_input(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
        let mut rng = seeded_rng(seed);
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn zero_net_uniform_output() {
        let net = Network::<f64>::zeros(&[3, 4, 5], 0.0).unwrap();
        let p = net.predict(&random_input(6, 3, 1)).unwrap();
        for row in p.iter_rows() {
            for &v in row {
                assert!((v - 0.2).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn eval_mode_deterministic_and_stochastic_rows() {
        let net = Network::<f64>::new(&[4, 8, 8, 3], 0.1, 2).unwrap();
        let x = random_input(10, 4, 3);
        let a = net.predict(&x).unwrap();
        assert_eq!(a, net.predict(&x).unwrap());
        let mut rng = seeded_rng(4);
        let t = net.forward(&x, Some(&mut rng)).unwrap();
        for row in a.iter_rows().chain(t.iter_rows()) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let net = Network::<f64>::new(&[4, 3, 2], 0.0, 2).unwrap();
        assert!(net.predict(&random_input(2, 3, 1)).is_err());
        assert!(Network::<f64>::new(&[4, 0, 2], 0.0, 2).is_err());
        assert!(Network::<f64>::new(&[4, 2], 1.0, 2).is_err());
    }

    #[test]
    fn loss_values() {
        let onehot = Matrix::one_hot(&[0, 1], 2);
        assert!(loss(&onehot, &onehot, &[1.0, 1.0]).unwrap() <= 1e-11);
        let uniform = Matrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]).unwrap();
        let l = loss(&uniform, &onehot, &[1.0, 1.0]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-9);
        let soft = Matrix::from_rows(&[[0.5, 0.5]]).unwrap();
        let l = loss(&soft, &soft, &[1.0]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn loss_scales_with_weights() {
        let p: Matrix<f64> = Matrix::from_rows(&[[0.3, 0.7], [0.9, 0.1]]).unwrap();
        let y = Matrix::one_hot(&[0, 0], 2);
        let a = loss(&p, &y, &[1.0, 1.0]).unwrap();
        let b = loss(&p, &y, &[2.5, 2.5]).unwrap();
        assert!((b - 2.5 * a).abs() < 1e-12);
    }

    #[test]
    fn output_gradient_identity() {
        // single-layer net: dL/db = Σ_i w_i (p_i - y_i) / B
        let mut net = Network::<f64>::new(&[3, 2], 0.0, 9).unwrap();
        net.layers[0].biases = vec![0.3, -0.2];
        let x = random_input(4, 3, 5);
        let y = Matrix::one_hot(&[0, 1, 1, 0], 2);
        let w = [1.0, 2.0, 0.5, 1.5];
        let cache = net.forward_cached(&x, None).unwrap();
        let g = net.backward(&cache, &y, &w).unwrap();
        for k in 0..2 {
            let expected: f64 = (0..4).map(|i| w[i] * (cache.probs[(i, k)] - y[(i, k)]) / 4.0).sum();
            assert!((g.layers[0].biases[k] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn balanced_loss_ignores_absent_class() {
        let p = Matrix::from_rows(&[[0.5, 0.5, 0.0], [0.5, 0.5, 0.0]]).unwrap();
        let l = class_balanced_loss(&p, &[0, 1]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn parameter_roundtrip() {
        let mut net = Network::<f64>::new(&[2, 3, 2], 0.0, 1).unwrap();
        let p = net.parameters();
        assert_eq!(p.len(), net.n_parameters());
        let doubled: Vec<f64> = p.iter().map(|v| v * 2.0).collect();
        net.set_parameters(&doubled).unwrap();
        assert_eq!(net.parameters(), doubled);
    }
}
