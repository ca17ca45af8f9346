//! Differentiable tensor operations.

use super::shape::{broadcast, broadcast_strides, numel, reduce_to_shape, strides, zip_broadcast};
use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const LN_EPS: f64 = 1e-5;

// 2-D matmul kernels; all accumulate into `c`.

/// c[m,n] += a[m,k] * b[k,n]
fn mm_nn<T: Scalar>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let crow = &mut c[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            let brow = &b[p * n..(p + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
}

/// c[m,n] += a[m,k] * b[n,k]^T
fn mm_nt<T: Scalar>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let crow = &mut c[i * n..(i + 1) * n];
        for (j, cv) in crow.iter_mut().enumerate() {
            let brow = &b[j * k..(j + 1) * k];
            let mut s = T::zero();
            for (&av, &bv) in arow.iter().zip(brow) {
                s += av * bv;
            }
            *cv += s;
        }
    }
}

/// c[m,n] += a[k,m]^T * b[k,n]
fn mm_tn<T: Scalar>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    for p in 0..k {
        let arow = &a[p * m..(p + 1) * m];
        let brow = &b[p * n..(p + 1) * n];
        for (i, &av) in arow.iter().enumerate() {
            let crow = &mut c[i * n..(i + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
}

/// Batch-matrix strides (one matrix = one unit) for broadcasting the leading
/// dims of `mat_shape` over `batch_shape`.
fn matrix_strides(mat_shape: &[usize], batch_shape: &[usize]) -> Vec<usize> {
    let own_batch = &mat_shape[..mat_shape.len() - 2];
    broadcast_strides(own_batch, batch_shape)
}

pub(crate) fn permute_data<T: Scalar>(data: &[T], in_shape: &[usize], axes: &[usize]) -> Vec<T> {
    let ndim = in_shape.len();
    let in_strides = strides(in_shape);
    let out_shape: Vec<usize> = axes.iter().map(|&a| in_shape[a]).collect();
    let map: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
    let total = numel(&out_shape);
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; ndim];
    let mut src = 0usize;
    for _ in 0..total {
        out.push(data[src]);
        for d in (0..ndim).rev() {
            idx[d] += 1;
            src += map[d];
            if idx[d] < out_shape[d] {
                break;
            }
            src -= map[d] * out_shape[d];
            idx[d] = 0;
        }
    }
    out
}

impl<T: Scalar> Tensor<T> {
    /// Batched matrix product `[..., m, k] x [..., k, n] -> [..., m, n]`;
    /// leading dimensions broadcast.
    pub fn matmul(&self, rhs: &Tensor<T>) -> Result<Tensor<T>> {
        let (asp, bsp) = (self.shape().to_vec(), rhs.shape().to_vec());
        if asp.len() < 2 || bsp.len() < 2 || asp[asp.len() - 1] != bsp[bsp.len() - 2] {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: asp,
                rhs: bsp,
            });
        }
        let (m, k) = (asp[asp.len() - 2], asp[asp.len() - 1]);
        let n = bsp[bsp.len() - 1];
        let batch = broadcast("matmul", &asp[..asp.len() - 2], &bsp[..bsp.len() - 2])?;
        let mut out_shape = batch.clone();
        out_shape.extend([m, n]);

        let a_ms = matrix_strides(&asp, &batch);
        let b_ms = matrix_strides(&bsp, &batch);
        let mut data = vec![T::zero(); numel(&out_shape)];
        {
            let a = self.data();
            let b = rhs.data();
            let mut off = 0usize;
            zip_broadcast(&batch, &a_ms, &b_ms, |ia, ib| {
                mm_nn(
                    &a[ia * m * k..(ia + 1) * m * k],
                    &b[ib * k * n..(ib + 1) * k * n],
                    &mut data[off..off + m * n],
                    m,
                    k,
                    n,
                );
                off += m * n;
            });
        }

        let batch_b = batch.clone();
        Tensor::from_op(
            data,
            out_shape,
            vec![self.clone(), rhs.clone()],
            Box::new(move |ctx| {
                let a = ctx.parents[0].data();
                let b = ctx.parents[1].data();
                let a_ms = matrix_strides(ctx.parents[0].shape(), &batch_b);
                let b_ms = matrix_strides(ctx.parents[1].shape(), &batch_b);
                let mut da = vec![T::zero(); a.len()];
                let mut db = vec![T::zero(); b.len()];
                let mut off = 0usize;
                zip_broadcast(&batch_b, &a_ms, &b_ms, |ia, ib| {
                    let g = &ctx.grad[off..off + m * n];
                    // dA = dC * B^T, dB = A^T * dC
                    mm_nt(g, &b[ib * k * n..(ib + 1) * k * n], &mut da[ia * m * k..(ia + 1) * m * k], m, n, k);
                    mm_tn(&a[ia * m * k..(ia + 1) * m * k], g, &mut db[ib * k * n..(ib + 1) * k * n], k, m, n);
                    off += m * n;
                });
                vec![Some(da), Some(db)]
            }),
            "matmul",
        )
    }

    fn binary(
        &self,
        rhs: &Tensor<T>,
        op: &'static str,
        f: impl Fn(T, T) -> T,
        make_rule: impl FnOnce(Vec<usize>) -> super::BackwardRule<T>,
    ) -> Result<Tensor<T>> {
        let out_shape = broadcast(op, self.shape(), rhs.shape())?;
        let a = self.data();
        let b = rhs.data();
        let mut data = Vec::with_capacity(numel(&out_shape));
        if self.shape() == rhs.shape() {
            data.extend(a.iter().zip(b.iter()).map(|(&x, &y)| f(x, y)));
        } else {
            let sa = broadcast_strides(self.shape(), &out_shape);
            let sb = broadcast_strides(rhs.shape(), &out_shape);
            zip_broadcast(&out_shape, &sa, &sb, |ia, ib| data.push(f(a[ia], b[ib])));
        }
        drop(a);
        drop(b);
        let rule = make_rule(out_shape.clone());
        Tensor::from_op(data, out_shape, vec![self.clone(), rhs.clone()], rule, op)
    }

    pub fn add(&self, rhs: &Tensor<T>) -> Result<Tensor<T>> {
        self.binary(rhs, "add", |x, y| x + y, |out_shape| {
            Box::new(move |ctx| {
                let da = reduce_to_shape(ctx.grad, &out_shape, ctx.parents[0].shape());
                let db = reduce_to_shape(ctx.grad, &out_shape, ctx.parents[1].shape());
                vec![Some(da), Some(db)]
            })
        })
    }

    pub fn sub(&self, rhs: &Tensor<T>) -> Result<Tensor<T>> {
        self.binary(rhs, "sub", |x, y| x - y, |out_shape| {
            Box::new(move |ctx| {
                let da = reduce_to_shape(ctx.grad, &out_shape, ctx.parents[0].shape());
                let neg: Vec<T> = ctx.grad.iter().map(|&g| -g).collect();
                let db = reduce_to_shape(&neg, &out_shape, ctx.parents[1].shape());
                vec![Some(da), Some(db)]
            })
        })
    }

    /// Elementwise product with broadcasting.
    pub fn mul(&self, rhs: &Tensor<T>) -> Result<Tensor<T>> {
        self.binary(rhs, "mul", |x, y| x * y, |out_shape| {
            Box::new(move |ctx| {
                let a = ctx.parents[0].data();
                let b = ctx.parents[1].data();
                let sa = broadcast_strides(ctx.parents[0].shape(), &out_shape);
                let sb = broadcast_strides(ctx.parents[1].shape(), &out_shape);
                let mut ga = Vec::with_capacity(ctx.grad.len());
                let mut gb = Vec::with_capacity(ctx.grad.len());
                let mut i = 0usize;
                zip_broadcast(&out_shape, &sa, &sb, |ia, ib| {
                    ga.push(ctx.grad[i] * b[ib]);
                    gb.push(ctx.grad[i] * a[ia]);
                    i += 1;
                });
                let da = reduce_to_shape(&ga, &out_shape, ctx.parents[0].shape());
                let db = reduce_to_shape(&gb, &out_shape, ctx.parents[1].shape());
                vec![Some(da), Some(db)]
            })
        })
    }

    /// Multiplication by a constant.
    pub fn scale(&self, c: f64) -> Result<Tensor<T>> {
        let k = T::from_f64(c);
        let data = self.data().iter().map(|&x| x * k).collect();
        Tensor::from_op(
            data,
            self.shape().to_vec(),
            vec![self.clone()],
            Box::new(move |ctx| vec![Some(ctx.grad.iter().map(|&g| g * k).collect())]),
            "scale",
        )
    }

    /// Numerically stable softmax along `axis` (negative counts from the end).
    pub fn softmax(&self, axis: isize) -> Result<Tensor<T>> {
        let nd = self.shape().len() as isize;
        let ax = if axis < 0 { axis + nd } else { axis };
        crate::contract!(
            (0..nd).contains(&ax),
            "softmax axis {axis} invalid for shape {:?}",
            self.shape()
        );
        let ax = ax as usize;
        let sp = self.shape();
        let axis_len = sp[ax];
        let outer: usize = sp[..ax].iter().product();
        let inner: usize = sp[ax + 1..].iter().product();
        let x = self.data();
        let mut data = vec![T::zero(); x.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |a: usize| o * axis_len * inner + a * inner + i;
                let mut mx = T::neg_infinity();
                for a in 0..axis_len {
                    mx = mx.max(x[at(a)]);
                }
                let mut z = T::zero();
                for a in 0..axis_len {
                    let e = (x[at(a)] - mx).exp();
                    data[at(a)] = e;
                    z += e;
                }
                for a in 0..axis_len {
                    data[at(a)] = data[at(a)] / z;
                }
            }
        }
        drop(x);
        Tensor::from_op(
            data,
            sp.to_vec(),
            vec![self.clone()],
            Box::new(move |ctx| {
                // ds_a = s_a * (g_a - sum_b g_b s_b)
                let s = ctx.out_data;
                let mut dx = vec![T::zero(); s.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |a: usize| o * axis_len * inner + a * inner + i;
                        let mut dot = T::zero();
                        for a in 0..axis_len {
                            dot += ctx.grad[at(a)] * s[at(a)];
                        }
                        for a in 0..axis_len {
                            dx[at(a)] = s[at(a)] * (ctx.grad[at(a)] - dot);
                        }
                    }
                }
                vec![Some(dx)]
            }),
            "softmax",
        )
    }

    /// LayerNorm over the last axis with affine parameters.
    pub fn layer_norm(&self, gamma: &Tensor<T>, beta: &Tensor<T>) -> Result<Tensor<T>> {
        let d = *self.shape().last().ok_or_else(|| {
            Error::Contract("layer_norm requires at least one dimension".into())
        })?;
        if gamma.shape() != [d] || beta.shape() != [d] {
            return Err(Error::ShapeMismatch {
                op: "layer_norm",
                lhs: self.shape().to_vec(),
                rhs: gamma.shape().to_vec(),
            });
        }
        let eps = T::from_f64(LN_EPS);
        let x = self.data();
        let g = gamma.data();
        let b = beta.data();
        let rows = x.len() / d;
        let mut data = vec![T::zero(); x.len()];
        let inv_d = T::one() / T::from_usize(d);
        for r in 0..rows {
            let xs = &x[r * d..(r + 1) * d];
            let mean = xs.iter().copied().sum::<T>() * inv_d;
            let var = xs.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_d;
            let inv_std = (var + eps).sqrt().recip();
            for j in 0..d {
                data[r * d + j] = (xs[j] - mean) * inv_std * g[j] + b[j];
            }
        }
        drop(x);
        drop(g);
        drop(b);
        Tensor::from_op(
            data,
            self.shape().to_vec(),
            vec![self.clone(), gamma.clone(), beta.clone()],
            Box::new(move |ctx| {
                let x = ctx.parents[0].data();
                let g = ctx.parents[1].data();
                let mut dx = vec![T::zero(); x.len()];
                let mut dgamma = vec![T::zero(); d];
                let mut dbeta = vec![T::zero(); d];
                let inv_d = T::one() / T::from_usize(d);
                for r in 0..rows {
                    let xs = &x[r * d..(r + 1) * d];
                    let gs = &ctx.grad[r * d..(r + 1) * d];
                    let mean = xs.iter().copied().sum::<T>() * inv_d;
                    let var = xs.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_d;
                    let inv_std = (var + eps).sqrt().recip();
                    let mut sum_dxhat = T::zero();
                    let mut sum_dxhat_xhat = T::zero();
                    for j in 0..d {
                        let xhat = (xs[j] - mean) * inv_std;
                        let dxhat = gs[j] * g[j];
                        dgamma[j] += gs[j] * xhat;
                        dbeta[j] += gs[j];
                        sum_dxhat += dxhat;
                        sum_dxhat_xhat += dxhat * xhat;
                    }
                    for j in 0..d {
                        let xhat = (xs[j] - mean) * inv_std;
                        let dxhat = gs[j] * g[j];
                        dx[r * d + j] =
                            inv_std * inv_d * (T::from_usize(d) * dxhat - sum_dxhat - xhat * sum_dxhat_xhat);
                    }
                }
                vec![Some(dx), Some(dgamma), Some(dbeta)]
            }),
            "layer_norm",
        )
    }

    /// Exact GELU, `x * Phi(x)` with the Gauss CDF.
    pub fn gelu(&self) -> Result<Tensor<T>> {
        let half = T::from_f64(0.5);
        let inv_sqrt2 = T::from_f64(std::f64::consts::FRAC_1_SQRT_2);
        let phi = move |x: T| half * (T::one() + (x * inv_sqrt2).erf());
        let data = self.data().iter().map(|&x| x * phi(x)).collect();
        Tensor::from_op(
            data,
            self.shape().to_vec(),
            vec![self.clone()],
            Box::new(move |ctx| {
                let inv_sqrt_2pi = T::from_f64(1.0 / (2.0 * std::f64::consts::PI).sqrt());
                let x = ctx.parents[0].data();
                let dx = ctx
                    .grad
                    .iter()
                    .zip(x.iter())
                    .map(|(&g, &x)| {
                        let pdf = (-(x * x) * half).exp() * inv_sqrt_2pi;
                        g * (phi(x) + x * pdf)
                    })
                    .collect();
                vec![Some(dx)]
            }),
            "gelu",
        )
    }

    pub fn reshape(&self, new_shape: &[usize]) -> Result<Tensor<T>> {
        crate::contract!(
            numel(new_shape) == self.numel(),
            "reshape {:?} -> {:?} changes element count",
            self.shape(),
            new_shape
        );
        let old_shape = self.shape().to_vec();
        Tensor::from_op(
            self.to_vec(),
            new_shape.to_vec(),
            vec![self.clone()],
            Box::new(move |ctx| {
                let _ = &old_shape;
                vec![Some(ctx.grad.to_vec())]
            }),
            "reshape",
        )
    }

    /// Reorders dimensions; `axes` must be a permutation of `0..ndim`.
    pub fn permute(&self, axes: &[usize]) -> Result<Tensor<T>> {
        let nd = self.shape().len();
        let mut seen = vec![false; nd];
        crate::contract!(
            axes.len() == nd && axes.iter().all(|&a| a < nd && !std::mem::replace(&mut seen[a], true)),
            "permute axes {:?} invalid for shape {:?}",
            axes,
            self.shape()
        );
        let out_shape: Vec<usize> = axes.iter().map(|&a| self.shape()[a]).collect();
        let data = permute_data(&self.data(), self.shape(), axes);
        let mut inverse = vec![0usize; nd];
        for (d, &a) in axes.iter().enumerate() {
            inverse[a] = d;
        }
        Tensor::from_op(
            data,
            out_shape,
            vec![self.clone()],
            Box::new(move |ctx| {
                vec![Some(permute_data(ctx.grad, ctx.out_shape, &inverse))]
            }),
            "permute",
        )
    }

    /// Concatenates along the last axis.
    pub fn cat_last(parts: &[&Tensor<T>]) -> Result<Tensor<T>> {
        crate::contract!(!parts.is_empty(), "cat_last of zero tensors");
        let lead = &parts[0].shape()[..parts[0].shape().len() - 1];
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            let sp = p.shape();
            if &sp[..sp.len() - 1] != lead {
                return Err(Error::ShapeMismatch {
                    op: "cat_last",
                    lhs: parts[0].shape().to_vec(),
                    rhs: sp.to_vec(),
                });
            }
            widths.push(sp[sp.len() - 1]);
        }
        let total: usize = widths.iter().sum();
        let rows: usize = lead.iter().product();
        let mut out_shape = lead.to_vec();
        out_shape.push(total);
        let mut data = Vec::with_capacity(rows * total);
        let borrowed: Vec<_> = parts.iter().map(|p| p.data()).collect();
        for r in 0..rows {
            for (src, &w) in borrowed.iter().zip(&widths) {
                data.extend_from_slice(&src[r * w..(r + 1) * w]);
            }
        }
        drop(borrowed);
        let widths_b = widths.clone();
        Tensor::from_op(
            data,
            out_shape,
            parts.iter().map(|&p| p.clone()).collect(),
            Box::new(move |ctx| {
                let mut grads: Vec<Vec<T>> = widths_b.iter().map(|&w| Vec::with_capacity(rows * w)).collect();
                for r in 0..rows {
                    let mut off = r * total;
                    for (gout, &w) in grads.iter_mut().zip(&widths_b) {
                        gout.extend_from_slice(&ctx.grad[off..off + w]);
                        off += w;
                    }
                }
                grads.into_iter().map(Some).collect()
            }),
            "cat_last",
        )
    }

    /// Slice `[start, start+len)` of the last axis.
    pub fn narrow_last(&self, start: usize, len: usize) -> Result<Tensor<T>> {
        let sp = self.shape();
        let w = *sp.last().ok_or_else(|| Error::Contract("narrow_last on 0-d tensor".into()))?;
        crate::contract!(
            start + len <= w,
            "narrow_last [{start}, {}) out of range for width {w}",
            start + len
        );
        let rows = self.numel() / w;
        let mut out_shape = sp.to_vec();
        *out_shape.last_mut().unwrap() = len;
        let x = self.data();
        let mut data = Vec::with_capacity(rows * len);
        for r in 0..rows {
            data.extend_from_slice(&x[r * w + start..r * w + start + len]);
        }
        drop(x);
        Tensor::from_op(
            data,
            out_shape,
            vec![self.clone()],
            Box::new(move |ctx| {
                let mut dx = vec![T::zero(); rows * w];
                for r in 0..rows {
                    dx[r * w + start..r * w + start + len]
                        .copy_from_slice(&ctx.grad[r * len..(r + 1) * len]);
                }
                vec![Some(dx)]
            }),
            "narrow_last",
        )
    }

    /// Euclidean norm over the last axis (the per-joint error of the losses).
    /// The gradient at an exactly zero vector is taken as zero.
    pub fn l2_norm_last(&self) -> Result<Tensor<T>> {
        let sp = self.shape();
        let d = *sp.last().ok_or_else(|| Error::Contract("l2_norm_last on 0-d tensor".into()))?;
        let rows = self.numel() / d;
        let out_shape: Vec<usize> = if sp.len() == 1 { vec![1] } else { sp[..sp.len() - 1].to_vec() };
        let x = self.data();
        let mut data = Vec::with_capacity(rows);
        for r in 0..rows {
            let s: T = x[r * d..(r + 1) * d].iter().map(|&v| v * v).sum();
            data.push(s.sqrt());
        }
        drop(x);
        Tensor::from_op(
            data,
            out_shape,
            vec![self.clone()],
            Box::new(move |ctx| {
                let x = ctx.parents[0].data();
                let mut dx = vec![T::zero(); x.len()];
                for r in 0..rows {
                    let norm = ctx.out_data[r];
                    if norm > T::zero() {
                        let g = ctx.grad[r] / norm;
                        for j in 0..d {
                            dx[r * d + j] = g * x[r * d + j];
                        }
                    }
                }
                vec![Some(dx)]
            }),
            "l2_norm_last",
        )
    }

    /// Mean of all elements, as a `[1]` tensor.
    pub fn mean_all(&self) -> Result<Tensor<T>> {
        let n = self.numel();
        crate::contract!(n > 0, "mean_all of empty tensor");
        let inv = T::one() / T::from_usize(n);
        let s: T = self.data().iter().copied().sum();
        Tensor::from_op(
            vec![s * inv],
            vec![1],
            vec![self.clone()],
            Box::new(move |ctx| vec![Some(vec![ctx.grad[0] * inv; n])]),
            "mean_all",
        )
    }

    /// Sum of all elements, as a `[1]` tensor.
    pub fn sum_all(&self) -> Result<Tensor<T>> {
        let n = self.numel();
        let s: T = self.data().iter().copied().sum();
        Tensor::from_op(
            vec![s],
            vec![1],
            vec![self.clone()],
            Box::new(move |ctx| vec![Some(vec![ctx.grad[0]; n])]),
            "sum_all",
        )
    }
}
