//! Deterministic evaluation of a trained model on a paired dataset.

use anyhow::{ensure, Result};

use sct_core::lpg::{PoseSequence, SkeletonTopology};
use sct_core::metrics::{evaluate_metrics, MetricsReport};
use sct_core::network::Model;
use sct_core::scalar::Scalar;
use sct_core::tensor::Tensor;

use crate::synth::SyntheticDataset;
use crate::trainer::{assemble_inputs, assemble_targets, MM_PER_UNIT};

/// Forward pass over every clip (dropout off), predictions in millimeters
/// as `[N, F, J, 3]`.
pub fn predict_mm<T: Scalar>(
    model: &Model<T>,
    dataset: &SyntheticDataset<T>,
    topo: &SkeletonTopology,
) -> Result<Tensor<T>> {
    ensure!(!dataset.inputs.is_empty(), "dataset is empty");
    let inputs: Vec<&PoseSequence<T>> = dataset.inputs.iter().collect();
    let x = assemble_inputs(&inputs, topo, model.cfg.lpg)?;
    let (pred, _) = model.detached().forward(&x, None)?;
    Ok(pred.scale(MM_PER_UNIT)?)
}

/// Batch evaluation: MPJPE / P-MPJPE / PCK / AUC in millimeters.
pub fn run_eval<T: Scalar>(
    model: &Model<T>,
    dataset: &SyntheticDataset<T>,
    topo: &SkeletonTopology,
) -> Result<MetricsReport> {
    let pred = predict_mm(model, dataset, topo)?;
    let targets: Vec<&PoseSequence<T>> = dataset.targets.iter().collect();
    let gt = assemble_targets(&targets)?.scale(MM_PER_UNIT)?;
    Ok(evaluate_metrics(&pred, &gt)?)
}

/// Splits batched millimeter predictions back into per-clip sequences for
/// JSON-lines export.
pub fn predictions_as_sequences<T: Scalar>(
    pred: &Tensor<T>,
    frames: usize,
    joints: usize,
) -> Result<Vec<PoseSequence<T>>> {
    let s = pred.shape();
    ensure!(
        s.len() == 4 && s[1] == frames && s[2] == joints && s[3] == 3,
        "prediction tensor {s:?} does not match {frames}x{joints}x3 clips"
    );
    let data = pred.to_vec();
    let per_clip = frames * joints * 3;
    (0..s[0])
        .map(|i| {
            Ok(PoseSequence::new(
                frames,
                joints,
                3,
                data[i * per_clip..(i + 1) * per_clip].to_vec(),
                None,
            )?)
        })
        .collect()
}
