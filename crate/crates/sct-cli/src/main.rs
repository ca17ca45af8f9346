use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use sct_cli::{bench, config, dataset, evalrun, macs, model_io, spectrum, synth, trainer};
use sct_core::lpg::write_pose_file;

#[derive(Parser)]
#[command(
    name = "sct",
    about = "Spectral-compression transformer for 2D-to-3D pose lifting",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic paired dataset from a JSON motion spec.
    Generate {
        /// JSON file describing the synthetic motion.
        #[arg(long)]
        spec: PathBuf,
        /// Output JSON-lines dataset (alternating 2D input / 3D truth lines).
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write the checkpoint plus a loss-curve CSV.
    Train {
        /// Flat key=value configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Paired JSON-lines dataset.
        #[arg(long)]
        data: PathBuf,
        /// Output directory for model.ckpt and loss_curve.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint; prints metrics as JSON.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Optionally export predictions as JSON-lines 3D poses.
        #[arg(long)]
        pred_out: Option<PathBuf>,
    },
    /// Analytic multiply-accumulate counts; prints JSON.
    Macs {
        #[arg(long)]
        config: PathBuf,
        /// Count the uncompressed baseline instead.
        #[arg(long)]
        vanilla: bool,
    },
    /// Median forward-pass wall clock: compressed vs uncompressed stack.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        repeats: usize,
    },
    /// Power spectrum of the hidden features entering one block.
    Spectrum {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Block index (0-based).
        #[arg(long)]
        block: usize,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Generate { spec, out } => {
            let spec = synth::SyntheticMotionSpec::load(&spec)?;
            let ds = synth::generate_synthetic::<f32>(&spec)?;
            dataset::write_paired(&out, &ds)?;
            eprintln!(
                "wrote {} clips of {} frames to {}",
                spec.clips,
                spec.frames,
                out.display()
            );
        }
        Cmd::Train { config, data, out } => {
            let cfg = config::load_config(&config)?;
            let ds = dataset::read_paired::<f32>(&data)?;
            let topo = synth::default_topology();
            std::fs::create_dir_all(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            let artifacts = trainer::train(&cfg, &ds, &topo)?;
            trainer::write_history_csv(&out.join("loss_curve.csv"), &artifacts.history)?;
            model_io::save_model(&out.join("model.ckpt"), &artifacts.model)?;
            eprintln!(
                "trained {} epochs, final train MPJPE {:.2} mm; artifacts in {}",
                artifacts.history.len(),
                artifacts.final_train_mpjpe_mm,
                out.display()
            );
        }
        Cmd::Eval { ckpt, data, pred_out } => {
            let model = model_io::load_model::<f32>(&ckpt)?;
            let ds = dataset::read_paired::<f32>(&data)?;
            let topo = synth::default_topology();
            let report = evalrun::run_eval(&model, &ds, &topo)?;
            if let Some(path) = pred_out {
                let pred = evalrun::predict_mm(&model, &ds, &topo)?;
                let clips = evalrun::predictions_as_sequences(
                    &pred,
                    ds.inputs[0].frames,
                    ds.inputs[0].joints,
                )?;
                write_pose_file(&path, &clips, dataset::DEFAULT_FPS)?;
            }
            println!("{}", report.to_json());
        }
        Cmd::Macs { config, vanilla } => {
            let cfg = config::load_config(&config)?;
            let breakdown = macs::macs_count(&cfg, vanilla);
            println!("{}", serde_json::to_string_pretty(&breakdown)?);
            eprintln!("total: {:.3} GMACs", breakdown.giga());
        }
        Cmd::Bench { config, repeats } => {
            let cfg = config::load_config(&config)?;
            let report = bench::bench_throughput(&cfg, repeats)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Cmd::Spectrum { ckpt, data, block, out } => {
            let model = model_io::load_model::<f32>(&ckpt)?;
            let ds = dataset::read_paired::<f32>(&data)?;
            let topo = synth::default_topology();
            let (report, fraction) = spectrum::spectrum_report(&model, &ds, &topo, block)?;
            let mut file = std::fs::File::create(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            report.write_csv(&mut file)?;
            println!(
                "{}",
                serde_json::json!({
                    "block": block,
                    "rows": report.power.len(),
                    "low_band_fraction": fraction,
                    "csv": out.display().to_string(),
                })
            );
        }
    }
    Ok(())
}
