//! Shape arithmetic shared by the tensor ops.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Row-major strides.
pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for d in (0..shape.len().saturating_sub(1)).rev() {
        s[d] = s[d + 1] * shape[d + 1];
    }
    s
}

/// Left-pads `shape` with ones to `ndim` dimensions.
pub fn pad_left(shape: &[usize], ndim: usize) -> Vec<usize> {
    let mut out = vec![1usize; ndim];
    out[ndim - shape.len()..].copy_from_slice(shape);
    out
}

/// NumPy-style broadcast of two shapes.
pub fn broadcast(op: &'static str, a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let ndim = a.len().max(b.len());
    let pa = pad_left(a, ndim);
    let pb = pad_left(b, ndim);
    let mut out = vec![0usize; ndim];
    for d in 0..ndim {
        out[d] = match (pa[d], pb[d]) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => {
                return Err(Error::ShapeMismatch {
                    op,
                    lhs: a.to_vec(),
                    rhs: b.to_vec(),
                })
            }
        };
    }
    Ok(out)
}

/// Strides for reading `shape` as if broadcast to `out_shape`
/// (stride 0 on broadcast axes).
pub fn broadcast_strides(shape: &[usize], out_shape: &[usize]) -> Vec<usize> {
    let padded = pad_left(shape, out_shape.len());
    let st = strides(&padded);
    padded
        .iter()
        .zip(&st)
        .map(|(&dim, &s)| if dim == 1 { 0 } else { s })
        .collect()
}

/// Walks every flat index of `out_shape` yielding `(flat_a, flat_b)` source
/// indices under broadcasting.
pub fn zip_broadcast(
    out_shape: &[usize],
    a_strides: &[usize],
    b_strides: &[usize],
    mut f: impl FnMut(usize, usize),
) {
    let ndim = out_shape.len();
    if ndim == 0 {
        f(0, 0);
        return;
    }
    let total = numel(out_shape);
    let mut idx = vec![0usize; ndim];
    let mut ia = 0usize;
    let mut ib = 0usize;
    for _ in 0..total {
        f(ia, ib);
        // mixed-radix increment
        for d in (0..ndim).rev() {
            idx[d] += 1;
            ia += a_strides[d];
            ib += b_strides[d];
            if idx[d] < out_shape[d] {
                break;
            }
            ia -= a_strides[d] * out_shape[d];
            ib -= b_strides[d] * out_shape[d];
            idx[d] = 0;
        }
    }
}

/// Sums `grad` (laid out as `from_shape`) down to `to_shape`, undoing a
/// broadcast.
pub fn reduce_to_shape<T: Scalar>(grad: &[T], from_shape: &[usize], to_shape: &[usize]) -> Vec<T> {
    if from_shape == to_shape {
        return grad.to_vec();
    }
    let mut out = vec![T::zero(); numel(to_shape)];
    let to_strides = broadcast_strides(to_shape, from_shape);
    let from_strides_v = strides(from_shape);
    zip_broadcast(from_shape, &from_strides_v, &to_strides, |src, dst| {
        out[dst] += grad[src];
    });
    out
}
