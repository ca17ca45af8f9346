//! Property tests for the transform pair: orthonormality, linearity,
//! fast/naive agreement, and the compression-length contract.

use proptest::prelude::*;

use sct_core::spectral::{
    compressed_len, dct, idct, idct_naive, low_pass, spectral_compress, DctMode, Spectrum,
};
use sct_core::Tensor;

fn signal_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, 1..128)
}

proptest! {
    #[test]
    fn parseval_holds(x in signal_strategy()) {
        let s = dct(&x, DctMode::Fast).unwrap();
        let time: f64 = x.iter().map(|v| v * v).sum();
        let freq: f64 = s.coefficients.iter().map(|v| v * v).sum();
        prop_assert!((time - freq).abs() <= 1e-5 * time.max(1.0));
    }

    #[test]
    fn transform_is_linear(x in signal_strategy(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let y: Vec<f64> = x.iter().rev().map(|v| v * 0.5 + 1.0).collect();
        let combo: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
        let sx = dct(&x, DctMode::Fast).unwrap();
        let sy = dct(&y, DctMode::Fast).unwrap();
        let sc = dct(&combo, DctMode::Fast).unwrap();
        let scale: f64 = sc.coefficients.iter().map(|v| v.abs()).fold(1.0, f64::max);
        for ((cx, cy), cc) in sx.coefficients.iter().zip(&sy.coefficients).zip(&sc.coefficients) {
            prop_assert!((a * cx + b * cy - cc).abs() <= 1e-5 * scale);
        }
    }

    #[test]
    fn fast_equals_naive(x in signal_strategy()) {
        let fast = dct(&x, DctMode::Fast).unwrap();
        let naive = dct(&x, DctMode::Naive).unwrap();
        let scale: f64 = naive.coefficients.iter().map(|v| v.abs()).fold(1.0, f64::max);
        for (f, n) in fast.coefficients.iter().zip(&naive.coefficients) {
            prop_assert!((f - n).abs() <= 1e-4 * scale);
        }
    }

    #[test]
    fn roundtrip_recovers_signal(x in signal_strategy()) {
        let round = idct(&dct(&x, DctMode::Fast).unwrap()).unwrap();
        let scale: f64 = x.iter().map(|v| v.abs()).fold(1.0, f64::max);
        for (a, b) in x.iter().zip(&round) {
            prop_assert!((a - b).abs() <= 1e-5 * scale);
        }
    }

    #[test]
    fn fast_idct_matches_naive_idct(x in signal_strategy()) {
        let s = dct(&x, DctMode::Fast).unwrap();
        let fast = idct(&s).unwrap();
        let naive = idct_naive(&s);
        let scale: f64 = naive.iter().map(|v| v.abs()).fold(1.0, f64::max);
        for (f, n) in fast.iter().zip(&naive) {
            prop_assert!((f - n).abs() <= 1e-4 * scale);
        }
    }

    #[test]
    fn low_pass_keeps_ceil_prefix(x in signal_strategy(), sigma in 0.05f64..0.95) {
        let s = dct(&x, DctMode::Fast).unwrap();
        let lp = low_pass(&s, sigma).unwrap();
        let f = compressed_len(x.len(), sigma);
        prop_assert_eq!(lp.source_length, f);
        prop_assert_eq!(lp.coefficients.len(), f);
        prop_assert_eq!(&lp.coefficients[..], &s.coefficients[..f]);
        prop_assert!(f >= 1);
    }

    #[test]
    fn compress_is_linear(sigma in 0.2f64..0.9, x in prop::collection::vec(-10.0f64..10.0, 8)) {
        let y: Vec<f64> = x.iter().map(|v| v * -1.5 + 0.3).collect();
        let tx = Tensor::from_vec(x.clone(), &[8], false).unwrap();
        let ty = Tensor::from_vec(y.clone(), &[8], false).unwrap();
        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let ts = Tensor::from_vec(sum, &[8], false).unwrap();
        let cx = spectral_compress(&tx, sigma).unwrap().to_vec();
        let cy = spectral_compress(&ty, sigma).unwrap().to_vec();
        let cs = spectral_compress(&ts, sigma).unwrap().to_vec();
        for ((a, b), c) in cx.iter().zip(&cy).zip(&cs) {
            prop_assert!((a + b - c).abs() <= 1e-9);
        }
    }
}

#[test]
fn compress_without_truncation_is_identity() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
    for frames in [1usize, 3, 10, 27, 64] {
        // sigma chosen so ceil(F * sigma) = F
        let sigma = 0.999;
        assert_eq!(compressed_len(frames, sigma), frames);
        let data: Vec<f64> = (0..2 * frames).map(|_| rng.random_range(-5.0..5.0)).collect();
        let x = Tensor::from_vec(data.clone(), &[2, frames], false).unwrap();
        let y = spectral_compress(&x, sigma).unwrap();
        let scale: f64 = data.iter().map(|v| v.abs()).fold(1.0, f64::max);
        for (a, b) in data.iter().zip(y.to_vec()) {
            assert!((a - b).abs() < 1e-5 * scale, "F={frames}");
        }
    }
}

#[test]
fn spectrum_invariant_rejects_inconsistent_lengths() {
    let s = Spectrum {
        coefficients: vec![1.0f64, 2.0],
        source_length: 3,
    };
    assert!(idct(&s).is_err());
}

#[test]
fn compress_length_contract_over_full_sweep() {
    // every input length up to 512, sigma on the ablation grid
    for sigma in [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9] {
        for n in 1..=512usize {
            let expect = (n as f64 * sigma).ceil() as usize;
            assert_eq!(compressed_len(n, sigma), expect);
            assert!(expect >= 1);
        }
        // exercise the actual operator on a sparse subset of lengths
        for n in [1usize, 2, 3, 17, 27, 64, 243, 511, 512] {
            let x = Tensor::<f64>::full(&[1, n], 1.0);
            let y = spectral_compress(&x, sigma).unwrap();
            assert_eq!(y.shape(), &[1, compressed_len(n, sigma)]);
        }
    }
}

#[test]
fn compressed_len_paper_values() {
    assert_eq!(compressed_len(243, 0.6), 146);
    assert_eq!(compressed_len(146, 0.6), 88);
    assert_eq!(compressed_len(88, 0.6), 53);
    assert_eq!(compressed_len(53, 0.6), 32);
    assert_eq!(compressed_len(32, 0.6), 20);
    // exact product: 5 * 0.6 = 3, no ceiling slop
    assert_eq!(compressed_len(5, 0.6), 3);
}
