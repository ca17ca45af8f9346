//! Finite-difference verification of the analytic gradients.

use super::{backward, zero_grads, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Compares the analytic gradient of the scalar function `f` against central
/// finite differences, for every coordinate of every tensor in `tensors`.
///
/// Returns the maximum relative error
/// `|analytic - centraldiff| / max(1, |centraldiff|)`.
/// Run in 64-bit mode; an f32 step of 1e-4 drowns in rounding error.
pub fn grad_check<T: Scalar, F>(f: F, tensors: &[Tensor<T>], eps: f64) -> Result<T>
where
    F: Fn() -> Result<Tensor<T>>,
{
    let eps = T::from_f64(eps);
    zero_grads(tensors);
    let loss = f()?;
    crate::contract!(
        loss.numel() == 1,
        "grad_check requires a scalar function, got shape {:?}",
        loss.shape()
    );
    backward(&loss)?;

    let analytic: Vec<Vec<T>> = tensors
        .iter()
        .map(|t| t.grad().unwrap_or_else(|| vec![T::zero(); t.numel()]))
        .collect();

    let mut worst = T::zero();
    for (ti, tensor) in tensors.iter().enumerate() {
        for i in 0..tensor.numel() {
            let orig = tensor.data()[i];
            tensor.data_mut()[i] = orig + eps;
            let plus = f()?.item()?;
            tensor.data_mut()[i] = orig - eps;
            let minus = f()?.item()?;
            tensor.data_mut()[i] = orig;

            let fd = (plus - minus) / (eps + eps);
            let a = analytic[ti][i];
            if fd.is_nan() || a.is_nan() {
                return Err(Error::NonFinite { op: "grad_check" });
            }
            let rel = (a - fd).abs() / T::one().max(fd.abs());
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

/// Single-input convenience wrapper: checks `d f(x) / d x`.
pub fn grad_check_input<T: Scalar, F>(f: F, x: &Tensor<T>, eps: f64) -> Result<T>
where
    F: Fn(&Tensor<T>) -> Result<Tensor<T>>,
{
    let input = Tensor::from_vec(x.to_vec(), x.shape(), true)?;
    let held = input.clone();
    grad_check(move || f(&held), &[input], eps)
}
