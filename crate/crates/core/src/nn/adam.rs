use alloc::vec::Vec;
use core::ops::Range;

use super::{Gradients, NetworkParams, Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 coefficient folded into the gradient before the moment updates.
    pub weight_decay: f64,
}

impl AdamConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay }
    }
}

/// One bias-corrected Adam update of `w` in place. `t` is the 1-based step
/// number after incrementing.
pub fn adam_update<T: Real>(cfg: &AdamConfig, t: u64, w: &mut [T], g: &[T], m: &mut [T], v: &mut [T]) {
    let b1 = T::from_f64(cfg.beta1);
    let b2 = T::from_f64(cfg.beta2);
    let one = T::one();
    let wd = T::from_f64(cfg.weight_decay);
    let bc1 = T::from_f64(1.0 - libm::pow(cfg.beta1, t as f64));
    let bc2 = T::from_f64(1.0 - libm::pow(cfg.beta2, t as f64));
    let lr = T::from_f64(cfg.lr);
    let eps = T::from_f64(cfg.eps);
    for i in 0..w.len() {
        let grad = g[i] + wd * w[i];
        m[i] = b1 * m[i] + (one - b1) * grad;
        v[i] = b2 * v[i] + (one - b2) * grad * grad;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        w[i] = w[i] - lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Adam moments for a contiguous group of parameter tensors.
#[derive(Debug, Clone)]
pub struct OptimState<T> {
    pub cfg: AdamConfig,
    pub t: u64,
    group: Range<usize>,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Real> OptimState<T> {
    /// Fresh state (t = 0, zero moments) for tensors `group` of `params`.
    pub fn new(cfg: AdamConfig, params: &NetworkParams<T>, group: Range<usize>) -> Self {
        let zeros: Vec<Tensor<T>> = params.tensors()[group.clone()].iter().map(|t| Tensor::zeros(t.shape())).collect();
        Self { cfg, t: 0, group, m: zeros.clone(), v: zeros }
    }

    pub fn group(&self) -> Range<usize> {
        self.group.clone()
    }

    /// Applies one update to the tensors of this group.
    pub fn step(&mut self, params: &mut NetworkParams<T>, grads: &Gradients<T>) {
        self.t += 1;
        let tensors = &mut params.tensors_mut()[self.group.clone()];
        for (k, w) in tensors.iter_mut().enumerate() {
            let g = grads.tensors[self.group.start + k].data();
            adam_update(&self.cfg, self.t, w.data_mut(), g, self.m[k].data_mut(), self.v[k].data_mut());
        }
    }
}
