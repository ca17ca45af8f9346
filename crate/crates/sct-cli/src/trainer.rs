//! Minibatch AdamW training on paired clips.
//!
//! Poses are in millimeters on disk; training runs on meter-scaled
//! coordinates (`MM_PER_UNIT`) and predictions are scaled back before any
//! metric is reported. Confidence channels are never rescaled.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use sct_core::lpg::{augment_sequence, horizontal_flip, plain_channels, PoseSequence,
                    SkeletonTopology};
use sct_core::network::{fd_loss, mpjpe_loss, Model, ModelConfig};
use sct_core::scalar::Scalar;
use sct_core::tensor::{backward, zero_grads, AdamW, Tensor};
use sct_core::Error as CoreError;

use crate::synth::SyntheticDataset;

/// Millimeters per training unit.
pub const MM_PER_UNIT: f64 = 1000.0;

#[derive(Debug, Clone, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    pub total_loss: f64,
    pub mpjpe_loss: f64,
    pub fd_loss: f64,
    /// Training-set MPJPE in millimeters, evaluated with dropout off.
    pub train_mpjpe_mm: f64,
}

pub struct TrainArtifacts<T: Scalar> {
    pub model: Model<T>,
    pub history: Vec<EpochStats>,
    pub final_train_mpjpe_mm: f64,
}

fn scaled<T: Scalar>(pose: &PoseSequence<T>, factor: f64) -> PoseSequence<T> {
    let k = T::from_f64(factor);
    PoseSequence {
        frames: pose.frames,
        joints: pose.joints,
        dims: pose.dims,
        data: pose.data.iter().map(|&v| v * k).collect(),
        confidence: pose.confidence.clone(),
    }
}

/// Stacks per-clip input channels (meters) into one `[B, F, J, ch]` tensor.
pub fn assemble_inputs<T: Scalar>(
    clips: &[&PoseSequence<T>],
    topo: &SkeletonTopology,
    lpg: bool,
) -> Result<Tensor<T>> {
    ensure!(!clips.is_empty(), "empty batch");
    let (frames, joints) = (clips[0].frames, clips[0].joints);
    let ch = if lpg { 5 } else { 3 };
    let mut data = Vec::with_capacity(clips.len() * frames * joints * ch);
    for clip in clips {
        ensure!(
            clip.frames == frames && clip.joints == joints,
            "clips in one batch must share dimensions"
        );
        let normalized = scaled(clip, 1.0 / MM_PER_UNIT);
        let t = if lpg {
            augment_sequence(&normalized, topo)?
        } else {
            plain_channels(&normalized)?
        };
        data.extend_from_slice(&t.to_vec());
    }
    Ok(Tensor::from_vec(
        data,
        &[clips.len(), frames, joints, ch],
        false,
    )?)
}

/// Stacks 3D targets (meters) into `[B, F, J, 3]`.
pub fn assemble_targets<T: Scalar>(clips: &[&PoseSequence<T>]) -> Result<Tensor<T>> {
    ensure!(!clips.is_empty(), "empty batch");
    let (frames, joints) = (clips[0].frames, clips[0].joints);
    let mut data = Vec::with_capacity(clips.len() * frames * joints * 3);
    for clip in clips {
        ensure!(clip.dims == 3, "targets must be 3D");
        let normalized = scaled(clip, 1.0 / MM_PER_UNIT);
        data.extend_from_slice(&normalized.data);
    }
    Ok(Tensor::from_vec(
        data,
        &[clips.len(), frames, joints, 3],
        false,
    )?)
}

/// Training-set MPJPE in millimeters, dropout off.
pub fn train_mpjpe_mm<T: Scalar>(
    model: &Model<T>,
    dataset: &SyntheticDataset<T>,
    topo: &SkeletonTopology,
) -> Result<f64> {
    let inputs: Vec<&PoseSequence<T>> = dataset.inputs.iter().collect();
    let targets: Vec<&PoseSequence<T>> = dataset.targets.iter().collect();
    let x = assemble_inputs(&inputs, topo, model.cfg.lpg)?;
    let gt = assemble_targets(&targets)?;
    let (pred, _) = model.detached().forward(&x, None)?;
    let loss = mpjpe_loss(&pred, &gt)?.item()?;
    Ok(loss.as_f64() * MM_PER_UNIT)
}

/// Runs the full minibatch AdamW loop: per-epoch learning-rate decay,
/// optional horizontal-flip augmentation, per-epoch loss history. Aborts
/// with a diagnostic if the loss goes non-finite.
pub fn train<T: Scalar>(
    cfg: &ModelConfig,
    dataset: &SyntheticDataset<T>,
    topo: &SkeletonTopology,
) -> Result<TrainArtifacts<T>> {
    ensure!(!dataset.inputs.is_empty(), "training dataset is empty");
    ensure!(
        dataset.inputs.len() == dataset.targets.len(),
        "dataset inputs/targets length mismatch"
    );
    let frames = dataset.inputs[0].frames;
    let joints = dataset.inputs[0].joints;
    ensure!(
        joints == cfg.joints,
        "dataset has {joints} joints, config expects {}",
        cfg.joints
    );
    ensure!(
        frames <= cfg.frames,
        "dataset clips are {frames} frames long, config maximum is {}",
        cfg.frames
    );
    if cfg.flip {
        ensure!(
            !topo.left_right_pairs().is_empty(),
            "flip augmentation needs left/right pairs in the topology"
        );
    }

    let model = Model::<T>::init(cfg.clone()).context("initializing model")?;
    let params = model.parameters();
    let mut opt = AdamW::<T>::new(cfg.lr, cfg.weight_decay);
    let mut data_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0xd0));

    let mut history = Vec::with_capacity(cfg.epochs);
    let clip_count = dataset.inputs.len();
    let batch = cfg.batch_size.max(1).min(clip_count);

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..clip_count).collect();
        order.shuffle(&mut data_rng);
        let mut epoch_total = 0.0f64;
        let mut epoch_mpjpe = 0.0f64;
        let mut epoch_fd = 0.0f64;
        let mut steps = 0usize;

        for chunk in order.chunks(batch) {
            let mut flipped_inputs: Vec<PoseSequence<T>> = Vec::new();
            let mut flipped_targets: Vec<PoseSequence<T>> = Vec::new();
            let mut batch_inputs: Vec<&PoseSequence<T>> = Vec::with_capacity(chunk.len());
            let mut batch_targets: Vec<&PoseSequence<T>> = Vec::with_capacity(chunk.len());
            for &i in chunk {
                if cfg.flip && data_rng.random_bool(0.5) {
                    flipped_inputs.push(horizontal_flip(&dataset.inputs[i], topo)?);
                    flipped_targets.push(horizontal_flip(&dataset.targets[i], topo)?);
                } else {
                    batch_inputs.push(&dataset.inputs[i]);
                    batch_targets.push(&dataset.targets[i]);
                }
            }
            batch_inputs.extend(flipped_inputs.iter());
            batch_targets.extend(flipped_targets.iter());

            let x = assemble_inputs(&batch_inputs, topo, cfg.lpg)?;
            let gt = assemble_targets(&batch_targets)?;
            let rng = (cfg.dropout > 0.0).then_some(&mut dropout_rng);

            let step = (|| -> sct_core::Result<(f64, f64, f64)> {
                let (pred, _) = model.forward(&x, rng)?;
                let m = mpjpe_loss(&pred, &gt)?;
                let f = fd_loss(&pred, &gt)?;
                let loss = if cfg.lambda > 0.0 {
                    m.add(&f.scale(cfg.lambda)?)?
                } else {
                    m.clone()
                };
                backward(&loss)?;
                Ok((
                    loss.item()?.as_f64(),
                    m.item()?.as_f64(),
                    f.item()?.as_f64(),
                ))
            })();
            let (total, m, f) = match step {
                Ok(v) => v,
                Err(CoreError::NonFinite { op }) => {
                    bail!("training diverged at epoch {epoch}: non-finite value in {op}")
                }
                Err(e) => return Err(e).context("training step failed"),
            };
            // zero learning rate: log losses but leave parameters untouched
            if cfg.lr > 0.0 {
                opt.step(&params).context("optimizer step")?;
            }
            zero_grads(&params);
            epoch_total += total;
            epoch_mpjpe += m;
            epoch_fd += f;
            steps += 1;
        }

        let lr_this_epoch = opt.lr;
        opt.lr *= cfg.lr_decay;
        let mpjpe_mm = train_mpjpe_mm(&model, dataset, topo)?;
        history.push(EpochStats {
            epoch,
            lr: lr_this_epoch,
            total_loss: epoch_total / steps as f64,
            mpjpe_loss: epoch_mpjpe / steps as f64,
            fd_loss: epoch_fd / steps as f64,
            train_mpjpe_mm: mpjpe_mm,
        });
    }

    let final_train_mpjpe_mm = history
        .last()
        .map(|s| s.train_mpjpe_mm)
        .unwrap_or(f64::INFINITY);
    Ok(TrainArtifacts {
        model,
        history,
        final_train_mpjpe_mm,
    })
}

/// Loss-curve CSV: one row per epoch.
pub fn write_history_csv(path: &Path, history: &[EpochStats]) -> Result<()> {
    use std::io::Write;
    let mut f = std::fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    writeln!(f, "epoch,lr,total_loss,mpjpe_loss,fd_loss,train_mpjpe_mm")?;
    for s in history {
        writeln!(
            f,
            "{},{},{},{},{},{}",
            s.epoch, s.lr, s.total_loss, s.mpjpe_loss, s.fd_loss, s.train_mpjpe_mm
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{default_topology, generate_synthetic, SyntheticMotionSpec};

    fn tiny_dataset(clips: usize) -> SyntheticDataset<f32> {
        generate_synthetic(&SyntheticMotionSpec {
            frames: 9,
            clips,
            noise_2d: 0.0,
            outlier_rate: 0.0,
            outlier_mm: 0.0,
            seed: 5,
            amplitude_mm: 40.0,
            max_frequency: 2.0,
            harmonics: None,
            rest_pose: None,
        })
        .unwrap()
    }

    fn tiny_cfg() -> ModelConfig {
        let mut cfg = ModelConfig::desk();
        cfg.frames = 9;
        cfg.channels = 16;
        cfg.heads = 2;
        cfg.epochs = 2;
        cfg.batch_size = 2;
        cfg
    }

    #[test]
    fn zero_lr_is_rejected_but_params_stable_under_tiny_lr() {
        // lr = 0 is a contract error in the optimizer; the spec's "lr = 0
        // leaves parameters unchanged" is covered by the AdamW unit tests
        // via zero gradients. Here: one epoch changes parameters.
        let ds = tiny_dataset(2);
        let cfg = tiny_cfg();
        let before = Model::<f32>::init(cfg.clone()).unwrap();
        let art = train(&cfg, &ds, &default_topology()).unwrap();
        let changed = before
            .named_parameters()
            .iter()
            .zip(art.model.named_parameters())
            .any(|((_, a), (_, b))| a.to_vec() != b.to_vec());
        assert!(changed, "training must move the parameters");
        assert_eq!(art.history.len(), 2);
    }

    #[test]
    fn flip_augmentation_path_runs() {
        let ds = tiny_dataset(3);
        let mut cfg = tiny_cfg();
        cfg.flip = true;
        cfg.epochs = 1;
        let art = train(&cfg, &ds, &default_topology()).unwrap();
        assert!(art.final_train_mpjpe_mm.is_finite());
    }

    #[test]
    fn zero_lr_leaves_parameters_unchanged() {
        let ds = tiny_dataset(2);
        let mut cfg = tiny_cfg();
        cfg.lr = 0.0;
        cfg.epochs = 3;
        let reference = Model::<f32>::init(cfg.clone()).unwrap();
        let art = train(&cfg, &ds, &default_topology()).unwrap();
        for ((_, a), (_, b)) in reference
            .named_parameters()
            .iter()
            .zip(art.model.named_parameters())
        {
            assert_eq!(a.to_vec(), b.to_vec());
        }
    }

    #[test]
    fn lr_decays_per_epoch() {
        let ds = tiny_dataset(2);
        let mut cfg = tiny_cfg();
        cfg.epochs = 3;
        cfg.lr_decay = 0.5;
        let art = train(&cfg, &ds, &default_topology()).unwrap();
        assert!((art.history[0].lr - cfg.lr).abs() < 1e-12);
        assert!((art.history[1].lr - cfg.lr * 0.5).abs() < 1e-12);
        assert!((art.history[2].lr - cfg.lr * 0.25).abs() < 1e-12);
    }
}
