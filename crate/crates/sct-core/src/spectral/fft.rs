//! Complex FFT plans used by the fast DCT path.
//!
//! Power-of-two lengths run an iterative radix-2 Cooley-Tukey with a
//! precomputed twiddle table; every other length goes through Bluestein's
//! chirp-z construction on top of a padded power-of-two transform. Twiddles
//! are evaluated in f64 before narrowing so the f32 path stays accurate.

use num_complex::Complex;

use crate::scalar::Scalar;

pub(crate) type Cplx<T> = Complex<T>;

fn unit<T: Scalar>(angle: f64) -> Cplx<T> {
    Complex::new(T::from_f64(angle.cos()), T::from_f64(angle.sin()))
}

struct Pow2Plan<T: Scalar> {
    n: usize,
    /// exp(-2 pi i k / n) for k in 0..n/2
    twiddle: Vec<Cplx<T>>,
}

impl<T: Scalar> Pow2Plan<T> {
    fn new(n: usize) -> Self {
        debug_assert!(n.is_power_of_two());
        let twiddle = (0..n / 2)
            .map(|k| unit(-2.0 * std::f64::consts::PI * k as f64 / n as f64))
            .collect();
        Pow2Plan { n, twiddle }
    }

    fn transform(&self, x: &mut [Cplx<T>], inverse: bool) {
        let n = self.n;
        debug_assert_eq!(x.len(), n);
        if n <= 1 {
            return;
        }
        // bit-reversal permutation
        let mut j = 0usize;
        for i in 1..n {
            let mut bit = n >> 1;
            while j & bit != 0 {
                j ^= bit;
                bit >>= 1;
            }
            j |= bit;
            if i < j {
                x.swap(i, j);
            }
        }
        let mut len = 2usize;
        while len <= n {
            let stride = n / len;
            for chunk in x.chunks_mut(len) {
                let (lo, hi) = chunk.split_at_mut(len / 2);
                for i in 0..len / 2 {
                    let mut w = self.twiddle[i * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let u = lo[i];
                    let v = hi[i] * w;
                    lo[i] = u + v;
                    hi[i] = u - v;
                }
            }
            len <<= 1;
        }
        if inverse {
            let inv_n = T::from_usize(n).recip();
            for v in x.iter_mut() {
                *v = *v * inv_n;
            }
        }
    }
}

enum Kind<T: Scalar> {
    Pow2(Pow2Plan<T>),
    Bluestein {
        /// exp(-i pi n^2 / len) for n in 0..len
        chirp: Vec<Cplx<T>>,
        /// forward transform of the chirp's conjugate, padded to m
        b_fft: Vec<Cplx<T>>,
        m: usize,
        inner: Pow2Plan<T>,
    },
}

/// Reusable DFT plan for one fixed length.
pub(crate) struct FftPlan<T: Scalar> {
    n: usize,
    kind: Kind<T>,
}

impl<T: Scalar> FftPlan<T> {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        if n.is_power_of_two() {
            return FftPlan {
                n,
                kind: Kind::Pow2(Pow2Plan::new(n)),
            };
        }
        let m = (2 * n - 1).next_power_of_two();
        let inner = Pow2Plan::new(m);
        // angles use n^2 mod 2n to keep the argument small and exact
        let chirp: Vec<Cplx<T>> = (0..n)
            .map(|i| {
                let sq = (i * i) % (2 * n);
                unit(-std::f64::consts::PI * sq as f64 / n as f64)
            })
            .collect();
        let mut b = vec![Complex::new(T::zero(), T::zero()); m];
        b[0] = chirp[0].conj();
        for i in 1..n {
            let v = chirp[i].conj();
            b[i] = v;
            b[m - i] = v;
        }
        inner.transform(&mut b, false);
        FftPlan {
            n,
            kind: Kind::Bluestein {
                chirp,
                b_fft: b,
                m,
                inner,
            },
        }
    }

    pub fn forward(&self, x: &mut [Cplx<T>]) {
        self.run(x, false);
    }

    pub fn inverse(&self, x: &mut [Cplx<T>]) {
        self.run(x, true);
    }

    fn run(&self, x: &mut [Cplx<T>], inverse: bool) {
        debug_assert_eq!(x.len(), self.n);
        match &self.kind {
            Kind::Pow2(p) => p.transform(x, inverse),
            Kind::Bluestein {
                chirp,
                b_fft,
                m,
                inner,
            } => {
                // ifft(x) = conj(fft(conj(x))) / n
                if inverse {
                    for v in x.iter_mut() {
                        *v = v.conj();
                    }
                }
                let mut a = vec![Complex::new(T::zero(), T::zero()); *m];
                for i in 0..self.n {
                    a[i] = x[i] * chirp[i];
                }
                inner.transform(&mut a, false);
                for (av, bv) in a.iter_mut().zip(b_fft) {
                    *av = *av * *bv;
                }
                inner.transform(&mut a, true);
                for i in 0..self.n {
                    x[i] = a[i] * chirp[i];
                }
                if inverse {
                    let inv_n = T::from_usize(self.n).recip();
                    for v in x.iter_mut() {
                        *v = v.conj() * inv_n;
                    }
                }
            }
        }
    }
}
