//! Analytic multiply-accumulate accounting for one forward pass (batch 1).
//!
//! Only matrix products are counted: QKV and output projections, attention
//! score/value contractions, FFN linears, the fusion gate (folded into the
//! output-projection bucket), embedding and regression head. LayerNorm,
//! softmax, DCT and interpolation are excluded; the transform cost is
//! O(N log N) against the quadratic attention terms.

use serde::Serialize;

use sct_core::network::ModelConfig;

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct LayerMacs {
    pub qkv_proj: u64,
    pub attn_scores: u64,
    pub attn_values: u64,
    pub out_proj: u64,
    pub ffn: u64,
}

impl LayerMacs {
    pub fn total(&self) -> u64 {
        self.qkv_proj + self.attn_scores + self.attn_values + self.out_proj + self.ffn
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MacsBreakdown {
    pub per_layer: Vec<LayerMacs>,
    pub embedding: u64,
    pub head: u64,
    pub total: u64,
}

impl MacsBreakdown {
    pub fn giga(&self) -> f64 {
        self.total as f64 / 1e9
    }
}

/// One encoder's MACs: `tokens` attention tokens per sequence, `seqs`
/// sequences in the folded batch.
fn encoder_macs(tokens: u64, seqs: u64, c: u64, ratio: u64) -> LayerMacs {
    let positions = tokens * seqs;
    LayerMacs {
        qkv_proj: 3 * positions * c * c,
        attn_scores: seqs * tokens * tokens * c,
        attn_values: seqs * tokens * tokens * c,
        out_proj: positions * c * c,
        ffn: 2 * positions * c * (ratio * c),
    }
}

fn add(a: &mut LayerMacs, b: LayerMacs) {
    a.qkv_proj += b.qkv_proj;
    a.attn_scores += b.attn_scores;
    a.attn_values += b.attn_values;
    a.out_proj += b.out_proj;
    a.ffn += b.ffn;
}

/// Counts the full dual-stream network. Depends only on the configured
/// shape, never on data. `vanilla` forces the no-compression schedule
/// (every layer at full length).
pub fn macs_count(cfg: &ModelConfig, vanilla: bool) -> MacsBreakdown {
    let c = cfg.channels as u64;
    let j = cfg.joints as u64;
    let f_full = cfg.frames as u64;
    let ratio = cfg.mlp_ratio as u64;
    let schedule = cfg.schedule();

    let mut per_layer = Vec::with_capacity(cfg.layers);
    for layer in 0..cfg.layers {
        let (f_in, f_out) = if vanilla {
            (f_full, f_full)
        } else {
            (schedule[layer] as u64, schedule[layer + 1] as u64)
        };
        let mut macs = LayerMacs::default();
        // branch 1: spatial at the incoming length, then temporal on the
        // compressed sequence
        add(&mut macs, encoder_macs(j, f_in, c, ratio));
        add(&mut macs, encoder_macs(f_out, j, c, ratio));
        // branch 2: temporal first (also lands at f_out), then spatial
        add(&mut macs, encoder_macs(f_out, j, c, ratio));
        add(&mut macs, encoder_macs(j, f_out, c, ratio));
        // fusion gate: per position, 2C x 2
        macs.out_proj += f_out * j * 2 * c * 2;
        per_layer.push(macs);
    }

    let embedding = f_full * j * (cfg.input_channels() as u64) * c;
    let head = f_full * j * c * 3;
    let total = per_layer.iter().map(|l| l.total()).sum::<u64>() + embedding + head;
    MacsBreakdown {
        per_layer,
        embedding,
        head,
        total,
    }
}
