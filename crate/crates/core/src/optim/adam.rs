//! Adam with bias correction, one state per network.

use ndarray::Zip;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{DenseNetwork, GradientSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.epsilon.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid Adam hyperparameters {self:?}"
            )))
        }
    }
}

/// First and second moment estimates paired with one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: GradientSet,
    pub v: GradientSet,
    pub step_count: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(net: &DenseNetwork, config: AdamConfig) -> Self {
        Self {
            m: GradientSet::zeros_like(net),
            v: GradientSet::zeros_like(net),
            step_count: 0,
            config,
        }
    }
}

fn check(net: &DenseNetwork, grads: &GradientSet, state: &AdamState) -> Result<()> {
    if net.is_frozen() {
        return Err(Error::Frozen);
    }
    if !grads.is_congruent(net) || !state.m.is_congruent(net) || !state.v.is_congruent(net) {
        return Err(Error::shape(
            "optimizer step",
            "gradients congruent with network",
            "mismatch",
        ));
    }
    Ok(())
}

fn apply(net: &mut DenseNetwork, grads: &GradientSet, state: &mut AdamState, scale: f64) {
    state.step_count += 1;
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let t = state.step_count as f64;
    let c1 = 1.0 - beta1.powf(t);
    let c2 = 1.0 - beta2.powf(t);

    let update = |p: &mut f64, m: &mut f64, v: &mut f64, &g: &f64| {
        let g = g * scale;
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
    };

    for (i, layer) in net.layers_mut().iter_mut().enumerate() {
        let (g, m, v) = (
            &grads.layers[i],
            &mut state.m.layers[i],
            &mut state.v.layers[i],
        );
        Zip::from(layer.weights_mut())
            .and(&mut m.weights)
            .and(&mut v.weights)
            .and(&g.weights)
            .for_each(update);
        Zip::from(layer.bias_mut())
            .and(&mut m.bias)
            .and(&mut v.bias)
            .and(&g.bias)
            .for_each(update);
    }
}

/// One bias-corrected Adam step; increments `state.step_count`.
pub fn adam_step(net: &mut DenseNetwork, grads: &GradientSet, state: &mut AdamState) -> Result<()> {
    check(net, grads, state)?;
    apply(net, grads, state, 1.0);
    Ok(())
}

/// Adam step on `scale · grads`. The scale enters before the moment update.
///
/// A scale of exactly zero is a no-op: parameters, moments and the step
/// counter are all left untouched, so a player whose weight is zero does not
/// drift on residual momentum.
pub fn scaled_adam_step(
    net: &mut DenseNetwork,
    grads: &GradientSet,
    state: &mut AdamState,
    scale: f64,
) -> Result<()> {
    if !(0.0..=1.0).contains(&scale) {
        return Err(Error::Config(format!("step scale {scale} outside [0, 1]")));
    }
    check(net, grads, state)?;
    if scale == 0.0 {
        return Ok(());
    }
    apply(net, grads, state, scale);
    Ok(())
}
