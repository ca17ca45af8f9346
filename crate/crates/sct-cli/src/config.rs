//! Flat `key = value` config files mirroring the model configuration.
//!
//! Unknown keys are rejected. `preset` (desk | paper) selects the base the
//! other keys override; the `SCT_SEED` environment variable wins over the
//! file's seed.

use std::path::Path;

use anyhow::{bail, Context, Result};
use sct_core::network::ModelConfig;

pub fn parse_config_str(text: &str) -> Result<ModelConfig> {
    let mut cfg = ModelConfig::desk();
    // presets first so later keys can override them
    for (lineno, key, value) in entries(text)? {
        if key == "preset" {
            cfg = match value.as_str() {
                "desk" => ModelConfig::desk(),
                "paper" => ModelConfig::paper(),
                other => bail!("line {lineno}: unknown preset '{other}'"),
            };
        }
    }
    for (lineno, key, value) in entries(text)? {
        let ctx = || format!("line {lineno}: invalid value '{value}' for {key}");
        match key.as_str() {
            "preset" => {}
            "layers" => cfg.layers = value.parse().with_context(ctx)?,
            "channels" => cfg.channels = value.parse().with_context(ctx)?,
            "frames" => cfg.frames = value.parse().with_context(ctx)?,
            "joints" => cfg.joints = value.parse().with_context(ctx)?,
            "sigma" => cfg.sigma = value.parse().with_context(ctx)?,
            "heads" => cfg.heads = value.parse().with_context(ctx)?,
            "lambda" => cfg.lambda = value.parse().with_context(ctx)?,
            "dropout" => cfg.dropout = value.parse().with_context(ctx)?,
            "mlp_ratio" => cfg.mlp_ratio = value.parse().with_context(ctx)?,
            "lpg" => cfg.lpg = parse_bool(&value).with_context(ctx)?,
            "lr" => cfg.lr = value.parse().with_context(ctx)?,
            "lr_decay" => cfg.lr_decay = value.parse().with_context(ctx)?,
            "weight_decay" => cfg.weight_decay = value.parse().with_context(ctx)?,
            "batch_size" => cfg.batch_size = value.parse().with_context(ctx)?,
            "epochs" => cfg.epochs = value.parse().with_context(ctx)?,
            "flip" => cfg.flip = parse_bool(&value).with_context(ctx)?,
            "seed" => cfg.seed = value.parse().with_context(ctx)?,
            other => bail!("line {lineno}: unknown config key '{other}'"),
        }
    }
    if let Ok(seed) = std::env::var("SCT_SEED") {
        cfg.seed = seed
            .parse()
            .with_context(|| format!("SCT_SEED is not an integer: '{seed}'"))?;
    }
    cfg.validate().context("invalid configuration")?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ModelConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    parse_config_str(&text)
}

fn entries(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {}: expected 'key = value', got '{raw}'", i + 1);
        };
        out.push((i + 1, key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

fn parse_bool(v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => bail!("expected a boolean, got '{other}'"),
    }
}
