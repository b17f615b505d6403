//! Adam with bias correction and decoupled weight decay.

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.0 }
    }
}

/// Moment estimates for one flat parameter block.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update of `params` in place using learning rate `lr` (which may
    /// differ from `cfg.lr` under a schedule).
    pub fn update(&mut self, params: &mut [f64], grads: &[f64], cfg: &AdamConfig, lr: f64) {
        assert_eq!(params.len(), grads.len());
        if self.m.len() != params.len() {
            *self = Self::new(params.len());
        }
        self.step += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.step as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.step as i32);
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            if cfg.weight_decay != 0.0 {
                *p -= lr * cfg.weight_decay * *p;
            }
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
}

/// Adam over a fixed, ordered list of tensors.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    states: Vec<AdamState>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, states: Vec::new() }
    }

    pub fn step_count(&self) -> u64 {
        self.states.first().map_or(0, AdamState::step_count)
    }

    /// Applies one update to every tensor. Tensors must be passed in the
    /// same order on every call.
    pub fn step(&mut self, params: &mut [&mut Tensor]) -> Result<()> {
        if self.states.is_empty() {
            self.states = params.iter().map(|p| AdamState::new(p.len())).collect();
        }
        if self.states.len() != params.len() {
            return Err(Error::State(format!(
                "optimizer tracks {} tensors, got {}",
                self.states.len(),
                params.len()
            )));
        }
        if let Some(i) = params.iter().position(|p| p.grad().is_none()) {
            return Err(Error::State(format!("tensor {i} has no gradient")));
        }
        let cfg = self.config;
        for (p, state) in params.iter_mut().zip(&mut self.states) {
            let grad = p.grad.take().expect("checked above");
            state.update(p.values_mut(), grad.as_slice().expect("standard layout"), &cfg, cfg.lr);
            p.grad = Some(grad);
        }
        Ok(())
    }
}
