//! Wall-clock comparison of the compressed and uncompressed stacks.

use std::time::Instant;

use anyhow::{ensure, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use sct_core::network::{Model, ModelConfig};
use sct_core::tensor::Tensor;

#[derive(Debug, Clone, Serialize)]
pub struct ThroughputReport {
    pub repeats: usize,
    pub vanilla_median_s: f64,
    pub sct_median_s: f64,
    /// vanilla time / SCT time; above 1 means compression pays off.
    pub speedup: f64,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Times `repeats` forward passes of each stack at identical width, depth
/// and sequence length (batch 1, dropout off, warmup excluded). Runs in f32.
pub fn bench_throughput(cfg: &ModelConfig, repeats: usize) -> Result<ThroughputReport> {
    ensure!(repeats >= 3, "need at least 3 repeats, got {repeats}");
    let model = Model::<f32>::init(cfg.clone())?.detached();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0xbe7c));
    let numel = cfg.frames * cfg.joints * cfg.input_channels();
    let data: Vec<f32> = (0..numel).map(|_| rng.random_range(-1.0..1.0)).collect();
    let input = Tensor::from_vec(data, &[1, cfg.frames, cfg.joints, cfg.input_channels()], false)?;

    // warmup both paths once
    model.forward(&input, None)?;
    model.forward_vanilla(&input, None)?;

    let mut sct_times = Vec::with_capacity(repeats);
    let mut vanilla_times = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let t0 = Instant::now();
        let (pose, _) = model.forward(&input, None)?;
        sct_times.push(t0.elapsed().as_secs_f64());
        std::hint::black_box(pose.to_vec());

        let t1 = Instant::now();
        let pose = model.forward_vanilla(&input, None)?;
        vanilla_times.push(t1.elapsed().as_secs_f64());
        std::hint::black_box(pose.to_vec());
    }

    let vanilla_median_s = median(vanilla_times);
    let sct_median_s = median(sct_times);
    Ok(ThroughputReport {
        repeats,
        vanilla_median_s,
        sct_median_s,
        speedup: vanilla_median_s / sct_median_s,
    })
}
