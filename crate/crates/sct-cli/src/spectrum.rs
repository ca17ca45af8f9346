//! Power-spectrum reports of the hidden temporal features entering a
//! block's temporal stage.

use anyhow::{ensure, Result};

use sct_core::lpg::{PoseSequence, SkeletonTopology};
use sct_core::network::Model;
use sct_core::scalar::Scalar;
use sct_core::spectral::{compressed_len, power_spectrum, SpectrumReport};
use sct_core::tensor::Tensor;

use crate::synth::SyntheticDataset;
use crate::trainer::assemble_inputs;

/// Runs every clip through the model (dropout off), captures the
/// pre-LayerNorm hidden features entering block `block_index`'s temporal
/// stage, and averages their DCT power over joints, channels and clips.
/// Also returns the fraction of total power inside the lowest
/// `ceil(sigma * F_block)` bins, the band the compression keeps.
pub fn spectrum_report<T: Scalar>(
    model: &Model<T>,
    dataset: &SyntheticDataset<T>,
    topo: &SkeletonTopology,
    block_index: usize,
) -> Result<(SpectrumReport, f64)> {
    ensure!(
        block_index < model.cfg.layers,
        "block index {block_index} out of range for {} layers",
        model.cfg.layers
    );
    ensure!(!dataset.inputs.is_empty(), "dataset is empty");
    let detached = model.detached();
    let mut clips: Vec<Tensor<T>> = Vec::with_capacity(dataset.inputs.len());
    for input in &dataset.inputs {
        let x = assemble_inputs(&[input], topo, model.cfg.lpg)?;
        let (_, acts) = detached.forward(&x, None)?;
        let hidden = &acts.temporal_inputs[block_index];
        let s = hidden.shape();
        clips.push(hidden.reshape(&[s[1], s[2], s[3]])?.detach());
    }
    let mut report = power_spectrum(&clips)?;
    report.block_index = Some(block_index);
    let keep = compressed_len(report.frames, model.cfg.sigma);
    let fraction = report.low_band_fraction(keep);
    Ok((report, fraction))
}

/// Convenience wrapper over single clips already shaped `[F, J, ch]`.
pub fn spectrum_report_for_clips<T: Scalar>(
    model: &Model<T>,
    clips_2d: &[PoseSequence<T>],
    topo: &SkeletonTopology,
    block_index: usize,
) -> Result<(SpectrumReport, f64)> {
    let dataset = SyntheticDataset {
        inputs: clips_2d.to_vec(),
        targets: Vec::new(),
    };
    spectrum_report(model, &dataset, topo, block_index)
}
