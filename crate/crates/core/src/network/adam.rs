use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{Gradients, Network};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { step_size: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |b: f64| b > 0.0 && b < 1.0;
        let positive = |v: f64| v > 0.0;
        if !positive(self.step_size) || !unit(self.beta1) || !unit(self.beta2) || !positive(self.epsilon) {
            return Err(Error::invalid(format!("invalid Adam settings {self:?}")));
        }
        Ok(())
    }
}

/// Moment accumulators shaped like the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub first: Gradients<T>,
    pub second: Gradients<T>,
    pub timestep: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(net: &Network<T>, config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, first: Gradients::zeros_like(net), second: Gradients::zeros_like(net), timestep: 0 })
    }
}

fn update<T: Scalar>(
    params: &mut [T],
    grads: &[T],
    m: &mut [T],
    v: &mut [T],
    (b1, b2, step, eps): (T, T, T, T),
    (c1, c2): (T, T),
) {
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = b1 * *m + (T::one() - b1) * g;
        *v = b2 * *v + (T::one() - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= step * m_hat / (v_hat.sqrt() + eps);
    }
}

/// One bias-corrected Adam update of every parameter.
pub fn adam_step<T: Scalar>(net: &mut Network<T>, grads: &Gradients<T>, state: &mut AdamState<T>) -> Result<()> {
    let shapes_match = grads.layers.len() == net.layers.len()
        && state.first.layers.len() == net.layers.len()
        && net
            .layers
            .iter()
            .zip(&grads.layers)
            .all(|(l, g)| l.weights.shape() == g.weights.shape() && l.biases.len() == g.biases.len());
    if !shapes_match {
        return Err(Error::invalid("gradient shapes do not match the network"));
    }
    state.timestep += 1;
    let c = &state.config;
    let hyper = (T::lit(c.beta1), T::lit(c.beta2), T::lit(c.step_size), T::lit(c.epsilon));
    let t = state.timestep as i32;
    let correction = (T::one() - T::lit(c.beta1).powi(t), T::one() - T::lit(c.beta2).powi(t));
    for (((layer, g), m), v) in
        net.layers.iter_mut().zip(&grads.layers).zip(state.first.layers.iter_mut()).zip(state.second.layers.iter_mut())
    {
        update(
            layer.weights.as_mut_slice(),
            g.weights.as_slice(),
            m.weights.as_mut_slice(),
            v.weights.as_mut_slice(),
            hyper,
            correction,
        );
        update(&mut layer.biases, &g.biases, &mut m.biases, &mut v.biases, hyper, correction);
    }
    Ok(())
}
