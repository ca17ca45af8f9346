//! Orthonormal DCT-II / IDCT pair, low-pass sequence compression, and the
//! power-spectrum analyzer for temporal feature signals.
//!
//! The transform pair is
//!
//! ```text
//! X_k = a_k sum_n x_n cos(pi k (2n+1) / 2N),   a_0 = sqrt(1/N), a_k = sqrt(2/N)
//! x_n = sum_k a_k X_k cos(pi k (2n+1) / 2N)
//! ```
//!
//! so the basis is orthonormal and Parseval holds. The fast path folds the
//! input even-odd and runs one complex FFT of the same length; arbitrary
//! lengths (including primes) are supported through Bluestein's algorithm.

mod fft;

use std::io::Write;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use fft::{Cplx, FftPlan};

/// DCT coefficients of one real signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T: Scalar> {
    pub coefficients: Vec<T>,
    pub source_length: usize,
}

/// Transform algorithm selector; both compute the identical quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DctMode {
    /// Direct O(N^2) summation; the reference the fast path is tested against.
    Naive,
    /// O(N log N) via a complex FFT on the even-odd folded signal.
    Fast,
}

/// Reusable forward/inverse DCT machinery for one signal length.
pub struct DctPlan<T: Scalar> {
    n: usize,
    fft: FftPlan<T>,
    /// exp(-i pi k / 2N) for k in 0..N
    fold: Vec<Cplx<T>>,
    alpha0: T,
    alphak: T,
}

impl<T: Scalar> DctPlan<T> {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "DCT length must be positive");
        let fold = (0..n)
            .map(|k| {
                let ang = -std::f64::consts::PI * k as f64 / (2.0 * n as f64);
                Complex::new(T::from_f64(ang.cos()), T::from_f64(ang.sin()))
            })
            .collect();
        DctPlan {
            n,
            fft: FftPlan::new(n),
            fold,
            alpha0: T::from_f64((1.0 / n as f64).sqrt()),
            alphak: T::from_f64((2.0 / n as f64).sqrt()),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    fn alpha(&self, k: usize) -> T {
        if k == 0 {
            self.alpha0
        } else {
            self.alphak
        }
    }

    /// Forward transform into `out` (both length N).
    pub fn forward(&self, x: &[T], out: &mut [T]) {
        let n = self.n;
        debug_assert_eq!(x.len(), n);
        debug_assert_eq!(out.len(), n);
        if n == 1 {
            out[0] = x[0];
            return;
        }
        // even indices ascending, then odd indices descending
        let mut v = vec![Complex::new(T::zero(), T::zero()); n];
        for i in 0..n.div_ceil(2) {
            v[i] = Complex::new(x[2 * i], T::zero());
        }
        for i in 0..n / 2 {
            v[n - 1 - i] = Complex::new(x[2 * i + 1], T::zero());
        }
        self.fft.forward(&mut v);
        for k in 0..n {
            let c = v[k] * self.fold[k];
            out[k] = self.alpha(k) * c.re;
        }
    }

    /// Inverse transform into `out` (both length N).
    pub fn inverse(&self, coeffs: &[T], out: &mut [T]) {
        let n = self.n;
        debug_assert_eq!(coeffs.len(), n);
        debug_assert_eq!(out.len(), n);
        if n == 1 {
            out[0] = coeffs[0];
            return;
        }
        // undo the forward: c_k = X_k / a_k, then V_k = conj(fold_k) * (c_k - i c_{N-k})
        let mut v = vec![Complex::new(T::zero(), T::zero()); n];
        v[0] = Complex::new(coeffs[0] / self.alpha0, T::zero());
        for k in 1..n {
            let ck = coeffs[k] / self.alphak;
            let cnk = coeffs[n - k] / self.alphak;
            v[k] = self.fold[k].conj() * Complex::new(ck, -cnk);
        }
        self.fft.inverse(&mut v);
        for i in 0..n.div_ceil(2) {
            out[2 * i] = v[i].re;
        }
        for i in 0..n / 2 {
            out[2 * i + 1] = v[n - 1 - i].re;
        }
    }
}

fn dct_naive_into<T: Scalar>(x: &[T], out: &mut [T]) {
    let n = x.len();
    let alpha0 = T::from_f64((1.0 / n as f64).sqrt());
    let alphak = T::from_f64((2.0 / n as f64).sqrt());
    for k in 0..n {
        let mut s = T::zero();
        for (i, &v) in x.iter().enumerate() {
            let ang = std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n as f64);
            s += v * T::from_f64(ang.cos());
        }
        out[k] = if k == 0 { alpha0 * s } else { alphak * s };
    }
}

/// O(N^2) inverse; reference for the fast path and for adjoint tests.
pub fn idct_naive<T: Scalar>(s: &Spectrum<T>) -> Vec<T> {
    let n = s.source_length;
    let alpha0 = T::from_f64((1.0 / n as f64).sqrt());
    let alphak = T::from_f64((2.0 / n as f64).sqrt());
    (0..n)
        .map(|i| {
            let mut acc = T::zero();
            for (k, &c) in s.coefficients.iter().enumerate() {
                let a = if k == 0 { alpha0 } else { alphak };
                let ang =
                    std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n as f64);
                acc += a * c * T::from_f64(ang.cos());
            }
            acc
        })
        .collect()
}

/// Orthonormal DCT-II of a real signal.
pub fn dct<T: Scalar>(x: &[T], mode: DctMode) -> Result<Spectrum<T>> {
    crate::contract!(!x.is_empty(), "dct of an empty signal");
    crate::contract!(
        x.iter().all(|v| v.is_finite()),
        "dct input contains a non-finite value"
    );
    let mut coefficients = vec![T::zero(); x.len()];
    match mode {
        DctMode::Naive => dct_naive_into(x, &mut coefficients),
        DctMode::Fast => DctPlan::new(x.len()).forward(x, &mut coefficients),
    }
    Ok(Spectrum {
        coefficients,
        source_length: x.len(),
    })
}

/// Inverse DCT; reconstructs a signal of the spectrum's source length.
pub fn idct<T: Scalar>(s: &Spectrum<T>) -> Result<Vec<T>> {
    crate::contract!(
        s.coefficients.len() == s.source_length && s.source_length >= 1,
        "spectrum length {} does not match source length {}",
        s.coefficients.len(),
        s.source_length
    );
    let mut out = vec![T::zero(); s.source_length];
    DctPlan::new(s.source_length).inverse(&s.coefficients, &mut out);
    Ok(out)
}

/// Number of coefficients kept at compression ratio `sigma`.
pub fn compressed_len(n: usize, sigma: f64) -> usize {
    (n as f64 * sigma).ceil() as usize
}

/// Hard low-pass truncation: keeps the `ceil(N * sigma)` lowest-frequency
/// coefficients and re-labels the result as a length-f spectrum.
pub fn low_pass<T: Scalar>(s: &Spectrum<T>, sigma: f64) -> Result<Spectrum<T>> {
    crate::contract!(
        sigma > 0.0 && sigma < 1.0,
        "sigma must lie in (0, 1), got {sigma}"
    );
    let f = compressed_len(s.source_length, sigma);
    Ok(Spectrum {
        coefficients: s.coefficients[..f].to_vec(),
        source_length: f,
    })
}

fn compress_rows<T: Scalar>(
    input: &[T],
    rows: usize,
    n_in: usize,
    keep: usize,
    n_out: usize,
    plan_in: &DctPlan<T>,
    plan_out: &DctPlan<T>,
) -> Vec<T> {
    debug_assert_eq!(plan_in.len(), n_in);
    debug_assert_eq!(plan_out.len(), n_out);
    let mut coeffs = vec![T::zero(); n_in.max(n_out)];
    let mut trunc = vec![T::zero(); n_out];
    let mut out = vec![T::zero(); rows * n_out];
    for r in 0..rows {
        plan_in.forward(&input[r * n_in..(r + 1) * n_in], &mut coeffs[..n_in]);
        trunc[..keep].copy_from_slice(&coeffs[..keep]);
        for v in trunc[keep..].iter_mut() {
            *v = T::zero();
        }
        plan_out.inverse(&trunc, &mut out[r * n_out..(r + 1) * n_out]);
    }
    out
}

/// Differentiable spectral compression along the last (temporal) axis:
/// per signal, `idct_f(low_pass(dct_F(x)))` with `f = ceil(F * sigma)`.
///
/// The inverse uses the length-f normalization, so a time-constant signal
/// comes out scaled by `sqrt(F/f)`; the next block's LayerNorm absorbs the
/// factor. The map is linear and its backward pass applies the adjoint:
/// DCT at length f, zero-pad to F, inverse DCT at length F.
pub fn spectral_compress<T: Scalar>(x: &Tensor<T>, sigma: f64) -> Result<Tensor<T>> {
    crate::contract!(
        sigma > 0.0 && sigma < 1.0,
        "sigma must lie in (0, 1), got {sigma}"
    );
    let shape = x.shape().to_vec();
    let f_in = *shape
        .last()
        .ok_or_else(|| Error::Contract("spectral_compress on 0-d tensor".into()))?;
    crate::contract!(f_in >= 1, "spectral_compress on empty temporal axis");
    let f_out = compressed_len(f_in, sigma);
    let rows = x.numel() / f_in;

    let plan_in = DctPlan::new(f_in);
    let plan_out = DctPlan::new(f_out);
    let data = compress_rows(
        &x.data(),
        rows,
        f_in,
        f_out,
        f_out,
        &plan_in,
        &plan_out,
    );
    let mut out_shape = shape.clone();
    *out_shape.last_mut().unwrap() = f_out;

    Tensor::from_op(
        data,
        out_shape,
        vec![x.clone()],
        Box::new(move |ctx| {
            // adjoint: rows of length f_out -> coefficients padded to f_in -> time
            let adj = compress_rows(ctx.grad, rows, f_out, f_out, f_in, &plan_out, &plan_in);
            vec![Some(adj)]
        }),
        "spectral_compress",
    )
}

/// Differentiable orthonormal DCT along the last axis (used by the
/// frequency-domain loss). Linear; the adjoint is the inverse transform.
pub fn dct_last_axis<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let shape = x.shape().to_vec();
    let n = *shape
        .last()
        .ok_or_else(|| Error::Contract("dct_last_axis on 0-d tensor".into()))?;
    crate::contract!(n >= 1, "dct_last_axis on empty axis");
    let rows = x.numel() / n;
    let plan = DctPlan::new(n);
    let input = x.data();
    let mut data = vec![T::zero(); input.len()];
    for r in 0..rows {
        plan.forward(&input[r * n..(r + 1) * n], &mut data[r * n..(r + 1) * n]);
    }
    drop(input);
    Tensor::from_op(
        data,
        shape,
        vec![x.clone()],
        Box::new(move |ctx| {
            let mut adj = vec![T::zero(); ctx.grad.len()];
            for r in 0..rows {
                plan.inverse(&ctx.grad[r * n..(r + 1) * n], &mut adj[r * n..(r + 1) * n]);
            }
            vec![Some(adj)]
        }),
        "dct_last_axis",
    )
}

/// Per-frequency power of hidden temporal features, averaged over joints,
/// channels and clips.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SpectrumReport {
    /// Mean power per frequency bin; length equals the temporal length.
    pub power: Vec<f64>,
    pub frames: usize,
    pub joints: usize,
    pub channels: usize,
    pub clips: usize,
    pub block_index: Option<usize>,
}

impl SpectrumReport {
    /// Fraction of total power in the `bins` lowest-frequency bins.
    pub fn low_band_fraction(&self, bins: usize) -> f64 {
        let total: f64 = self.power.iter().sum();
        if total == 0.0 {
            return 0.0;
        }
        self.power.iter().take(bins).sum::<f64>() / total
    }

    /// CSV export: header `freq,power`, one row per bin.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "freq,power")?;
        for (k, p) in self.power.iter().enumerate() {
            writeln!(w, "{k},{p}")?;
        }
        Ok(())
    }
}

/// Analyzes hidden features: each clip is `[F, J, C]`, every (joint, channel)
/// column is one temporal signal. Signals are DCT'd, squared, and averaged.
pub fn power_spectrum<T: Scalar>(clips: &[Tensor<T>]) -> Result<SpectrumReport> {
    crate::contract!(!clips.is_empty(), "power_spectrum needs at least one clip");
    let shape = clips[0].shape().to_vec();
    crate::contract!(
        shape.len() == 3,
        "power_spectrum expects clips of shape [F, J, C], got {:?}",
        shape
    );
    let (frames, joints, channels) = (shape[0], shape[1], shape[2]);
    let plan = DctPlan::new(frames);
    let mut power = vec![0.0f64; frames];
    let mut signal = vec![T::zero(); frames];
    let mut coeffs = vec![T::zero(); frames];
    for clip in clips {
        crate::contract!(
            clip.shape() == shape.as_slice(),
            "power_spectrum clips must share a shape: {:?} vs {:?}",
            clip.shape(),
            shape
        );
        let data = clip.data();
        for j in 0..joints {
            for c in 0..channels {
                for t in 0..frames {
                    signal[t] = data[(t * joints + j) * channels + c];
                }
                plan.forward(&signal, &mut coeffs);
                for (p, &v) in power.iter_mut().zip(&coeffs) {
                    *p += v.as_f64() * v.as_f64();
                }
            }
        }
    }
    let total_signals = (clips.len() * joints * channels) as f64;
    for p in power.iter_mut() {
        *p /= total_signals;
    }
    Ok(SpectrumReport {
        power,
        frames,
        joints,
        channels,
        clips: clips.len(),
        block_index: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_signal(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
    }

    #[test]
    fn constant_signal_is_dc_only() {
        let c = 1.7f64;
        for n in [1usize, 4, 7, 243] {
            let s = dct(&vec![c; n], DctMode::Fast).unwrap();
            assert!(
                (s.coefficients[0] - c * (n as f64).sqrt()).abs() < 1e-6,
                "n={n} dc={}",
                s.coefficients[0]
            );
            for &v in &s.coefficients[1..] {
                assert!(v.abs() < 1e-6, "n={n}");
            }
        }
    }

    #[test]
    fn length_one_is_identity() {
        let s = dct(&[3.25f64], DctMode::Fast).unwrap();
        assert_eq!(s.coefficients, vec![3.25]);
        assert_eq!(idct(&s).unwrap(), vec![3.25]);
    }

    #[test]
    fn fast_matches_naive_oracle_on_length_7() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = rand_signal(7, &mut rng);
        let fast = dct(&x, DctMode::Fast).unwrap();
        let naive = dct(&x, DctMode::Naive).unwrap();
        for (f, n) in fast.coefficients.iter().zip(&naive.coefficients) {
            assert!((f - n).abs() < 1e-5, "{f} vs {n}");
        }
    }

    #[test]
    fn zero_spectrum_inverts_to_zero() {
        let s = Spectrum {
            coefficients: vec![0.0f64; 9],
            source_length: 9,
        };
        assert!(idct(&s).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dc_impulse_inverts_to_constant() {
        let s = Spectrum {
            coefficients: vec![1.0f64, 0.0, 0.0, 0.0],
            source_length: 4,
        };
        for v in idct(&s).unwrap() {
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn roundtrip_across_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in [1usize, 2, 3, 5, 8, 27, 100, 243, 512] {
            let x = rand_signal(n, &mut rng);
            let round = idct(&dct(&x, DctMode::Fast).unwrap()).unwrap();
            let scale: f64 = x.iter().map(|v| v.abs()).fold(1.0, f64::max);
            for (a, b) in x.iter().zip(&round) {
                assert!((a - b).abs() / scale < 1e-5, "n={n}");
            }
        }
    }

    #[test]
    fn low_pass_lengths() {
        let mk = |n: usize| Spectrum {
            coefficients: vec![1.0f64; n],
            source_length: n,
        };
        assert_eq!(low_pass(&mk(243), 0.6).unwrap().source_length, 146);
        // successive application: 27 -> 17 -> 11 -> 7 -> 5 -> 3
        let mut s = mk(27);
        let mut lens = Vec::new();
        for _ in 0..5 {
            s = low_pass(&s, 0.6).unwrap();
            lens.push(s.source_length);
        }
        assert_eq!(lens, vec![17, 11, 7, 5, 3]);
        // ceil can round up to N: no truncation
        assert_eq!(low_pass(&mk(10), 0.99).unwrap().source_length, 10);
        assert!(low_pass(&mk(10), 0.0).is_err());
        assert!(low_pass(&mk(10), 1.0).is_err());
    }

    #[test]
    fn compress_scales_dc_by_sqrt_ratio() {
        // constant c over F frames -> constant c * sqrt(F/f) over f frames
        let c = 2.0f64;
        let (frames, sigma) = (27usize, 0.6);
        let x = Tensor::from_vec(vec![c; frames], &[frames], false).unwrap();
        let y = spectral_compress(&x, sigma).unwrap();
        let f = compressed_len(frames, sigma);
        assert_eq!(y.shape(), &[f]);
        let expect = c * (frames as f64 / f as f64).sqrt();
        for v in y.to_vec() {
            assert!((v - expect).abs() < 1e-9, "{v} vs {expect}");
        }
    }

    #[test]
    fn compress_preserves_low_bins() {
        // pure cosine at DCT bin 2, F=16, sigma=0.5 -> all energy still in bin 2
        let (frames, bin) = (16usize, 2usize);
        let x: Vec<f64> = (0..frames)
            .map(|n| {
                (std::f64::consts::PI * bin as f64 * (2 * n + 1) as f64 / (2.0 * frames as f64))
                    .cos()
            })
            .collect();
        let t = Tensor::from_vec(x, &[frames], false).unwrap();
        let y = spectral_compress(&t, 0.5).unwrap();
        assert_eq!(y.shape(), &[8]);
        let spec = dct(&y.to_vec(), DctMode::Naive).unwrap();
        let total: f64 = spec.coefficients.iter().map(|v| v * v).sum();
        let at_bin = spec.coefficients[bin] * spec.coefficients[bin];
        assert!(at_bin / total > 0.999, "energy fraction {}", at_bin / total);
    }

    #[test]
    fn power_spectrum_flat_for_white_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let (frames, joints, channels) = (16usize, 5usize, 25usize);
        let clips: Vec<Tensor<f64>> = (0..8)
            .map(|_| {
                let data = (0..frames * joints * channels)
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect();
                Tensor::from_vec(data, &[frames, joints, channels], false).unwrap()
            })
            .collect();
        let report = power_spectrum(&clips).unwrap();
        assert_eq!(report.power.len(), frames);
        let mx = report.power.iter().cloned().fold(0.0, f64::max);
        let mn = report.power.iter().cloned().fold(f64::MAX, f64::min);
        assert!(mx / mn < 3.0, "white noise spectrum not flat: {mx} / {mn}");
    }

    #[test]
    fn power_spectrum_band_limited_and_dc() {
        let (frames, joints, channels) = (32usize, 3usize, 4usize);
        // low-bin cosines only (bins 1 and 3)
        let mut data = vec![0.0f64; frames * joints * channels];
        for j in 0..joints {
            for c in 0..channels {
                for t in 0..frames {
                    let a1 = (std::f64::consts::PI * 1.0 * (2 * t + 1) as f64
                        / (2.0 * frames as f64))
                        .cos();
                    let a3 = (std::f64::consts::PI * 3.0 * (2 * t + 1) as f64
                        / (2.0 * frames as f64))
                        .cos();
                    data[(t * joints + j) * channels + c] = a1 + 0.5 * a3;
                }
            }
        }
        let clip = Tensor::from_vec(data, &[frames, joints, channels], false).unwrap();
        let report = power_spectrum(std::slice::from_ref(&clip)).unwrap();
        let total: f64 = report.power.iter().sum();
        let in_band = report.power[1] + report.power[3];
        assert!(in_band / total >= 0.99);

        // constant features put all power in bin zero
        let const_clip = Tensor::from_vec(
            vec![1.5f64; frames * joints * channels],
            &[frames, joints, channels],
            false,
        )
        .unwrap();
        let dc = power_spectrum(std::slice::from_ref(&const_clip)).unwrap();
        assert!(dc.power[0] > 0.0);
        assert!(dc.power[1..].iter().all(|&p| p < 1e-12 * dc.power[0]));
    }

    #[test]
    fn report_csv_shape() {
        let report = SpectrumReport {
            power: vec![1.0, 0.5],
            frames: 2,
            joints: 1,
            channels: 1,
            clips: 1,
            block_index: Some(0),
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "freq,power\n0,1\n1,0.5\n");
    }
}
