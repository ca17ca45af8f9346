//! Model checkpoints: the named parameter arrays plus `meta.*` entries that
//! embed the configuration, so `eval` and `spectrum` need no separate config
//! file. Fractional hyperparameters are stored in micro-units (x 1e6) to
//! survive the 4-byte float payload without drift.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use sct_core::network::{Model, ModelConfig};
use sct_core::scalar::Scalar;
use sct_core::tensor::{apply_arrays, load_checkpoint, save_checkpoint, CheckpointArray, Tensor};

const MICRO: f64 = 1e6;

fn meta_entries<T: Scalar>(cfg: &ModelConfig) -> Vec<(String, Tensor<T>)> {
    let scalar = |v: f64| Tensor::from_vec(vec![T::from_f64(v)], &[1], false).expect("finite");
    vec![
        ("meta.layers".into(), scalar(cfg.layers as f64)),
        ("meta.channels".into(), scalar(cfg.channels as f64)),
        ("meta.frames".into(), scalar(cfg.frames as f64)),
        ("meta.joints".into(), scalar(cfg.joints as f64)),
        ("meta.heads".into(), scalar(cfg.heads as f64)),
        ("meta.mlp_ratio".into(), scalar(cfg.mlp_ratio as f64)),
        ("meta.lpg".into(), scalar(if cfg.lpg { 1.0 } else { 0.0 })),
        ("meta.flip".into(), scalar(if cfg.flip { 1.0 } else { 0.0 })),
        ("meta.batch_size".into(), scalar(cfg.batch_size as f64)),
        ("meta.epochs".into(), scalar(cfg.epochs as f64)),
        ("meta.seed".into(), scalar(cfg.seed as f64)),
        ("meta.sigma_micro".into(), scalar((cfg.sigma * MICRO).round())),
        ("meta.lambda_micro".into(), scalar((cfg.lambda * MICRO).round())),
        ("meta.dropout_micro".into(), scalar((cfg.dropout * MICRO).round())),
        ("meta.lr_micro".into(), scalar((cfg.lr * MICRO).round())),
        ("meta.lr_decay_micro".into(), scalar((cfg.lr_decay * MICRO).round())),
        (
            "meta.weight_decay_micro".into(),
            scalar((cfg.weight_decay * MICRO).round()),
        ),
    ]
}

pub fn save_model<T: Scalar>(path: &Path, model: &Model<T>) -> Result<()> {
    let mut entries = model.named_parameters();
    entries.extend(meta_entries::<T>(&model.cfg));
    save_checkpoint(path, &entries)
        .with_context(|| format!("writing checkpoint {}", path.display()))
}

fn meta_value(arrays: &[CheckpointArray], name: &str) -> Result<f64> {
    arrays
        .iter()
        .find(|a| a.name == name)
        .map(|a| a.data[0] as f64)
        .ok_or_else(|| anyhow!("checkpoint is missing {name}"))
}

fn config_from_arrays(arrays: &[CheckpointArray]) -> Result<ModelConfig> {
    let v = |name: &str| meta_value(arrays, name);
    Ok(ModelConfig {
        layers: v("meta.layers")? as usize,
        channels: v("meta.channels")? as usize,
        frames: v("meta.frames")? as usize,
        joints: v("meta.joints")? as usize,
        heads: v("meta.heads")? as usize,
        mlp_ratio: v("meta.mlp_ratio")? as usize,
        lpg: v("meta.lpg")? != 0.0,
        flip: v("meta.flip")? != 0.0,
        batch_size: v("meta.batch_size")? as usize,
        epochs: v("meta.epochs")? as usize,
        seed: v("meta.seed")? as u64,
        sigma: v("meta.sigma_micro")? / MICRO,
        lambda: v("meta.lambda_micro")? / MICRO,
        dropout: v("meta.dropout_micro")? / MICRO,
        lr: v("meta.lr_micro")? / MICRO,
        lr_decay: v("meta.lr_decay_micro")? / MICRO,
        weight_decay: v("meta.weight_decay_micro")? / MICRO,
    })
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<Model<T>> {
    let arrays =
        load_checkpoint(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    let cfg = config_from_arrays(&arrays)?;
    let model = Model::<T>::init(cfg).context("checkpoint config is invalid")?;
    let params: Vec<CheckpointArray> = arrays
        .into_iter()
        .filter(|a| !a.name.starts_with("meta."))
        .collect();
    let named = model.named_parameters();
    if params.len() != named.len() {
        bail!(
            "checkpoint has {} parameter arrays, model expects {}",
            params.len(),
            named.len()
        );
    }
    apply_arrays(&named, &params).context("checkpoint does not match the model")?;
    Ok(model)
}
