//! Adam and learning-rate schedules.

use crate::element::Element;
use crate::error::{Result, TensorError};
use crate::param::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of a flat buffer at step `t` (1-based).
pub fn adam_update<T: Element>(param: &mut [T], grad: &[T], m: &mut [T], v: &mut [T], t: u64, cfg: &AdamConfig) {
    let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
    let c1 = T::one() - T::of(cfg.beta1.powi(t as i32));
    let c2 = T::one() - T::of(cfg.beta2.powi(t as i32));
    let (lr, eps) = (T::of(cfg.lr), T::of(cfg.eps));
    for i in 0..param.len() {
        let g = grad[i];
        m[i] = b1 * m[i] + (T::one() - b1) * g;
        v[i] = b2 * v[i] + (T::one() - b2) * g * g;
        let mhat = m[i] / c1;
        let vhat = v[i] / c2;
        param[i] = param[i] - lr * mhat / (vhat.sqrt() + eps);
    }
}

/// Adam optimizer state: first/second moments per parameter and step count.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    cfg: AdamConfig,
    t: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    shapes: Vec<Vec<usize>>,
}

impl<T: Element> Adam<T> {
    pub fn new(cfg: AdamConfig, store: &ParamStore<T>) -> Self {
        let shapes: Vec<Vec<usize>> = store.iter().map(|(_, p)| p.value().shape().to_vec()).collect();
        let zeros = || shapes.iter().map(|s| vec![T::zero(); s.iter().product()]).collect();
        Adam {
            cfg,
            t: 0,
            m: zeros(),
            v: zeros(),
            shapes,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.cfg
    }

    pub fn lr(&self) -> f64 {
        self.cfg.lr
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.cfg.lr = lr;
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one update from the store's accumulated gradients.
    pub fn step(&mut self, store: &mut ParamStore<T>) -> Result<()> {
        if store.len() != self.shapes.len() {
            return Err(TensorError::arg(format!(
                "optimizer tracks {} parameters, store has {}",
                self.shapes.len(),
                store.len()
            )));
        }
        for (id, shape) in store.ids().zip(&self.shapes) {
            if store.value(id).shape() != shape.as_slice() {
                return Err(TensorError::shape("adam_step", store.value(id).shape(), shape));
            }
        }
        if !(self.cfg.lr > 0.0) {
            return Err(TensorError::arg(format!("learning rate {} must be positive", self.cfg.lr)));
        }
        self.t += 1;
        let ids: Vec<_> = store.ids().collect();
        for (i, id) in ids.into_iter().enumerate() {
            let (value, grad) = store.value_and_grad_mut(id);
            adam_update(value, grad, &mut self.m[i], &mut self.v[i], self.t, &self.cfg);
        }
        Ok(())
    }
}

/// Cosine annealing per epoch from `base` down to `base / 100`.
pub fn cosine_lr(base: f64, epoch: usize, epochs: usize) -> f64 {
    let min = base / 100.0;
    if epochs == 0 {
        return base;
    }
    let frac = epoch as f64 / epochs as f64;
    min + 0.5 * (base - min) * (1.0 + (std::f64::consts::PI * frac).cos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn store(v: f64) -> (ParamStore<f64>, crate::ParamId) {
        let mut s = ParamStore::new();
        let id = s.insert("p", Tensor::full([1], v)).unwrap();
        (s, id)
    }

    #[test]
    fn zero_gradient_leaves_parameter() {
        let (mut s, id) = store(1.25);
        let mut opt = Adam::new(AdamConfig::with_lr(0.1), &s);
        opt.step(&mut s).unwrap();
        assert_eq!(s.value(id).data(), &[1.25]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let (mut s, id) = store(0.0);
        s.add_grad(id, &Tensor::full([1], 1.0)).unwrap();
        let mut opt = Adam::new(AdamConfig::with_lr(0.1), &s);
        opt.step(&mut s).unwrap();
        // mhat = 1, vhat = 1 → Δ = -0.1 / (1 + 1e-8)
        assert!((s.value(id).data()[0] + 0.1).abs() < 1e-8);
    }

    #[test]
    fn two_steps_match_closed_form() {
        let (mut s, id) = store(0.5);
        let g = 0.3;
        let cfg = AdamConfig::with_lr(0.01);
        let mut opt = Adam::new(cfg, &s);
        for _ in 0..2 {
            s.zero_grad();
            s.add_grad(id, &Tensor::full([1], g)).unwrap();
            opt.step(&mut s).unwrap();
        }
        let mut p = 0.5;
        let (mut m, mut v) = (0.0, 0.0);
        for t in 1..=2 {
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mhat = m / (1.0 - 0.9f64.powi(t));
            let vhat = v / (1.0 - 0.999f64.powi(t));
            p -= 0.01 * mhat / (vhat.sqrt() + 1e-8);
        }
        assert!((s.value(id).data()[0] - p).abs() < 1e-10);
        assert_eq!(opt.steps(), 2);
    }

    #[test]
    fn cosine_endpoints() {
        assert_eq!(cosine_lr(1e-3, 0, 10), 1e-3);
        assert!((cosine_lr(1e-3, 10, 10) - 1e-5).abs() < 1e-15);
        assert!((cosine_lr(1e-3, 5, 10) - (1e-5 + 0.5 * (1e-3 - 1e-5))).abs() < 1e-15);
    }
}
