//! AdamW with decoupled weight decay.

use super::Tensor;
use crate::error::Result;
use crate::scalar::Scalar;

/// Optimizer state: first/second moment per parameter plus the step counter.
///
/// Weight decay is decoupled: parameters shrink by `lr * wd * p` before the
/// bias-corrected Adam update is applied.
pub struct AdamW<T: Scalar> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    moments: Vec<(Vec<T>, Vec<T>)>,
}

impl<T: Scalar> AdamW<T> {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        AdamW {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            moments: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update over `params`. Parameters without a gradient are skipped
    /// (their moments still exist but stay zero). The same slice, in the same
    /// order, must be passed on every call.
    pub fn step(&mut self, params: &[Tensor<T>]) -> Result<()> {
        crate::contract!(self.lr > 0.0, "learning rate must be positive, got {}", self.lr);
        if self.moments.is_empty() {
            self.moments = params
                .iter()
                .map(|p| (vec![T::zero(); p.numel()], vec![T::zero(); p.numel()]))
                .collect();
        }
        crate::contract!(
            self.moments.len() == params.len(),
            "optimizer was initialized with {} parameters, got {}",
            self.moments.len(),
            params.len()
        );
        self.step += 1;
        let t = self.step as i32;
        let lr = T::from_f64(self.lr);
        let b1 = T::from_f64(self.beta1);
        let b2 = T::from_f64(self.beta2);
        let eps = T::from_f64(self.eps);
        let wd = T::from_f64(self.weight_decay);
        let bc1 = T::one() - b1.powi(t);
        let bc2 = T::one() - b2.powi(t);

        for (p, (m, v)) in params.iter().zip(self.moments.iter_mut()) {
            let Some(grad) = p.grad() else { continue };
            crate::contract!(
                grad.len() == p.numel(),
                "gradient length {} does not match parameter {:?}",
                grad.len(),
                p.shape()
            );
            let mut data = p.data_mut();
            for i in 0..data.len() {
                let g = grad[i];
                data[i] = data[i] - lr * wd * data[i];
                m[i] = b1 * m[i] + (T::one() - b1) * g;
                v[i] = b2 * v[i] + (T::one() - b2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                data[i] = data[i] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
