//! Paired dataset files: JSON-lines where each clip contributes two
//! consecutive lines, first the 2D input (with confidence), then the 3D
//! ground truth.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};

use sct_core::lpg::PoseSequence;
use sct_core::scalar::Scalar;

use crate::synth::SyntheticDataset;

pub const DEFAULT_FPS: f64 = 50.0;

pub fn write_paired<T: Scalar>(path: &Path, dataset: &SyntheticDataset<T>) -> Result<()> {
    ensure!(
        dataset.inputs.len() == dataset.targets.len(),
        "dataset has {} inputs but {} targets",
        dataset.inputs.len(),
        dataset.targets.len()
    );
    let mut f =
        File::create(path).with_context(|| format!("creating {}", path.display()))?;
    for (input, target) in dataset.inputs.iter().zip(&dataset.targets) {
        writeln!(f, "{}", input.to_json_line(DEFAULT_FPS))?;
        writeln!(f, "{}", target.to_json_line(DEFAULT_FPS))?;
    }
    Ok(())
}

pub fn read_paired<T: Scalar>(path: &Path) -> Result<SyntheticDataset<T>> {
    let reader =
        BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let lines: Vec<String> = reader
        .lines()
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|l| !l.trim().is_empty())
        .collect();
    if lines.len() % 2 != 0 {
        bail!(
            "paired dataset {} has an odd number of clips lines ({})",
            path.display(),
            lines.len()
        );
    }
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for (i, pair) in lines.chunks(2).enumerate() {
        let input = PoseSequence::<T>::from_json_line(&pair[0], 2)
            .with_context(|| format!("clip {i}: bad 2D input line"))?;
        let target = PoseSequence::<T>::from_json_line(&pair[1], 3)
            .with_context(|| format!("clip {i}: bad 3D ground-truth line"))?;
        ensure!(
            input.frames == target.frames && input.joints == target.joints,
            "clip {i}: input is {}x{} but target is {}x{}",
            input.frames,
            input.joints,
            target.frames,
            target.joints
        );
        inputs.push(input);
        targets.push(target);
    }
    ensure!(!inputs.is_empty(), "dataset {} is empty", path.display());
    Ok(SyntheticDataset { inputs, targets })
}
