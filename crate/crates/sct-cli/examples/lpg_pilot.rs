//! Scratch comparison harness for the LPG ablation setup.

use sct_cli::synth::{default_topology, generate_synthetic, SyntheticMotionSpec};
use sct_cli::trainer::train;
use sct_core::network::ModelConfig;

fn main() {
    for (clips, epochs) in [(4usize, 150usize), (16, 60)] {
        for data_seed in [7u64, 8] {
            let ds = generate_synthetic::<f32>(&SyntheticMotionSpec {
                frames: 27,
                clips,
                noise_2d: 10.0,
                outlier_rate: 0.1,
                outlier_mm: 150.0,
                seed: data_seed,
                amplitude_mm: 60.0,
                max_frequency: 3.0,
                harmonics: None,
                rest_pose: None,
            })
            .unwrap();
            let topo = default_topology();
            for model_seed in [42u64, 43] {
                let mut line =
                    format!("drop=0.1 clips={clips} data={data_seed} model={model_seed}:");
                for lpg in [true, false] {
                    let cfg = ModelConfig {
                        layers: 2,
                        channels: 32,
                        frames: 27,
                        joints: 17,
                        sigma: 0.6,
                        heads: 4,
                        lambda: 1.0,
                        dropout: 0.1,
                        mlp_ratio: 4,
                        lpg,
                        lr: 2e-3,
                        lr_decay: 0.99,
                        weight_decay: 0.01,
                        batch_size: 16,
                        epochs,
                        flip: false,
                        seed: model_seed,
                    };
                    let art = train(&cfg, &ds, &topo).unwrap();
                    line.push_str(&format!(
                        " [lpg={lpg} final={:.2}]",
                        art.final_train_mpjpe_mm
                    ));
                }
                println!("{line}");
            }
        }
    }
}
