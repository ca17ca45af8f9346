//! Encoder blocks: spatial attention, spectrally compressed temporal
//! attention, and the dual-stream combination with adaptive fusion.
//!
//! The temporal encoder normalizes, compresses the sequence with the DCT
//! low-pass (`F -> f = ceil(F * sigma)`), then runs attention and the FFN on
//! the shortened sequence; both residuals operate on the compressed sequence.
//! The spatial encoder is a plain pre-norm transformer over the joint axis.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spectral::spectral_compress;
use crate::tensor::Tensor;

/// Per-block hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct BlockConfig {
    pub channels: usize,
    pub heads: usize,
    /// FFN hidden width as a multiple of `channels`.
    pub mlp_ratio: usize,
    pub sigma: f64,
    pub dropout: f64,
}

impl BlockConfig {
    pub fn validate(&self) -> Result<()> {
        crate::contract!(
            self.channels > 0 && self.heads > 0 && self.channels % self.heads == 0,
            "channels {} must be divisible by heads {}",
            self.channels,
            self.heads
        );
        crate::contract!(
            self.sigma > 0.0 && self.sigma < 1.0,
            "sigma must lie in (0, 1), got {}",
            self.sigma
        );
        crate::contract!(
            (0.0..1.0).contains(&self.dropout),
            "dropout must lie in [0, 1), got {}",
            self.dropout
        );
        crate::contract!(self.mlp_ratio > 0, "mlp_ratio must be positive");
        Ok(())
    }
}

pub struct LayerNormParams<T: Scalar> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
}

impl<T: Scalar> LayerNormParams<T> {
    pub fn identity(dim: usize) -> Self {
        LayerNormParams {
            gamma: Tensor::param_ones(&[dim]),
            beta: Tensor::param_zeros(&[dim]),
        }
    }
}

pub struct AttentionParams<T: Scalar> {
    pub w_q: Tensor<T>,
    pub w_k: Tensor<T>,
    pub w_v: Tensor<T>,
    pub w_o: Tensor<T>,
}

pub struct FfnParams<T: Scalar> {
    pub w1: Tensor<T>,
    pub b1: Tensor<T>,
    pub w2: Tensor<T>,
    pub b2: Tensor<T>,
}

/// One encoder's weights: two LayerNorm affine pairs, attention, FFN.
pub struct EncoderParams<T: Scalar> {
    pub ln1: LayerNormParams<T>,
    pub attn: AttentionParams<T>,
    pub ln2: LayerNormParams<T>,
    pub ffn: FfnParams<T>,
}

const INIT_STD: f64 = 0.02;

impl<T: Scalar> EncoderParams<T> {
    pub fn init(channels: usize, mlp_ratio: usize, rng: &mut ChaCha8Rng) -> Self {
        let hidden = channels * mlp_ratio;
        EncoderParams {
            ln1: LayerNormParams::identity(channels),
            attn: AttentionParams {
                w_q: Tensor::param_randn(&[channels, channels], INIT_STD, rng),
                w_k: Tensor::param_randn(&[channels, channels], INIT_STD, rng),
                w_v: Tensor::param_randn(&[channels, channels], INIT_STD, rng),
                w_o: Tensor::param_randn(&[channels, channels], INIT_STD, rng),
            },
            ln2: LayerNormParams::identity(channels),
            ffn: FfnParams {
                w1: Tensor::param_randn(&[channels, hidden], INIT_STD, rng),
                b1: Tensor::param_zeros(&[hidden]),
                w2: Tensor::param_randn(&[hidden, channels], INIT_STD, rng),
                b2: Tensor::param_zeros(&[channels]),
            },
        }
    }

    /// All attention and FFN weights zero, LayerNorm affine at identity.
    /// Collapses the encoder to its residual path; used in degenerate tests.
    pub fn zeroed(channels: usize, mlp_ratio: usize) -> Self {
        let hidden = channels * mlp_ratio;
        EncoderParams {
            ln1: LayerNormParams::identity(channels),
            attn: AttentionParams {
                w_q: Tensor::param_zeros(&[channels, channels]),
                w_k: Tensor::param_zeros(&[channels, channels]),
                w_v: Tensor::param_zeros(&[channels, channels]),
                w_o: Tensor::param_zeros(&[channels, channels]),
            },
            ln2: LayerNormParams::identity(channels),
            ffn: FfnParams {
                w1: Tensor::param_zeros(&[channels, hidden]),
                b1: Tensor::param_zeros(&[hidden]),
                w2: Tensor::param_zeros(&[hidden, channels]),
                b2: Tensor::param_zeros(&[channels]),
            },
        }
    }

    pub fn named(&self, prefix: &str, out: &mut Vec<(String, Tensor<T>)>) {
        out.push((format!("{prefix}.ln1.gamma"), self.ln1.gamma.clone()));
        out.push((format!("{prefix}.ln1.beta"), self.ln1.beta.clone()));
        out.push((format!("{prefix}.attn.w_q"), self.attn.w_q.clone()));
        out.push((format!("{prefix}.attn.w_k"), self.attn.w_k.clone()));
        out.push((format!("{prefix}.attn.w_v"), self.attn.w_v.clone()));
        out.push((format!("{prefix}.attn.w_o"), self.attn.w_o.clone()));
        out.push((format!("{prefix}.ln2.gamma"), self.ln2.gamma.clone()));
        out.push((format!("{prefix}.ln2.beta"), self.ln2.beta.clone()));
        out.push((format!("{prefix}.ffn.w1"), self.ffn.w1.clone()));
        out.push((format!("{prefix}.ffn.b1"), self.ffn.b1.clone()));
        out.push((format!("{prefix}.ffn.w2"), self.ffn.w2.clone()));
        out.push((format!("{prefix}.ffn.b2"), self.ffn.b2.clone()));
    }
}

/// Two-way gate projecting the channel-concatenated pair to fusion logits.
pub struct FusionParams<T: Scalar> {
    pub proj: Tensor<T>,
}

impl<T: Scalar> FusionParams<T> {
    pub fn init(channels: usize, rng: &mut ChaCha8Rng) -> Self {
        FusionParams {
            proj: Tensor::param_randn(&[2 * channels, 2], INIT_STD, rng),
        }
    }

    pub fn zeroed(channels: usize) -> Self {
        FusionParams {
            proj: Tensor::param_zeros(&[2 * channels, 2]),
        }
    }
}

/// Weights of one dual-stream block: branch 1 runs spatial -> temporal,
/// branch 2 runs temporal -> spatial, each with its own parameters, merged
/// by the fusion gate.
pub struct BlockParams<T: Scalar> {
    pub spatial_a: EncoderParams<T>,
    pub temporal_a: EncoderParams<T>,
    pub temporal_b: EncoderParams<T>,
    pub spatial_b: EncoderParams<T>,
    pub fusion: FusionParams<T>,
}

impl<T: Scalar> BlockParams<T> {
    pub fn init(cfg: &BlockConfig, rng: &mut ChaCha8Rng) -> Self {
        BlockParams {
            spatial_a: EncoderParams::init(cfg.channels, cfg.mlp_ratio, rng),
            temporal_a: EncoderParams::init(cfg.channels, cfg.mlp_ratio, rng),
            temporal_b: EncoderParams::init(cfg.channels, cfg.mlp_ratio, rng),
            spatial_b: EncoderParams::init(cfg.channels, cfg.mlp_ratio, rng),
            fusion: FusionParams::init(cfg.channels, rng),
        }
    }

    pub fn zeroed(cfg: &BlockConfig) -> Self {
        BlockParams {
            spatial_a: EncoderParams::zeroed(cfg.channels, cfg.mlp_ratio),
            temporal_a: EncoderParams::zeroed(cfg.channels, cfg.mlp_ratio),
            temporal_b: EncoderParams::zeroed(cfg.channels, cfg.mlp_ratio),
            spatial_b: EncoderParams::zeroed(cfg.channels, cfg.mlp_ratio),
            fusion: FusionParams::zeroed(cfg.channels),
        }
    }

    pub fn named(&self, prefix: &str, out: &mut Vec<(String, Tensor<T>)>) {
        self.spatial_a.named(&format!("{prefix}.spatial_a"), out);
        self.temporal_a.named(&format!("{prefix}.temporal_a"), out);
        self.temporal_b.named(&format!("{prefix}.temporal_b"), out);
        self.spatial_b.named(&format!("{prefix}.spatial_b"), out);
        out.push((format!("{prefix}.fusion.proj"), self.fusion.proj.clone()));
    }
}

fn dims3<T: Scalar>(x: &Tensor<T>) -> Result<(usize, usize, usize)> {
    let s = x.shape();
    crate::contract!(s.len() == 3, "expected a [B, N, C] tensor, got {:?}", s);
    Ok((s[0], s[1], s[2]))
}

fn dims4<T: Scalar>(x: &Tensor<T>) -> Result<(usize, usize, usize, usize)> {
    let s = x.shape();
    crate::contract!(s.len() == 4, "expected a [B, F, J, C] tensor, got {:?}", s);
    Ok((s[0], s[1], s[2], s[3]))
}

fn maybe_dropout<T: Scalar>(
    x: Tensor<T>,
    rate: f64,
    rng: &mut Option<&mut ChaCha8Rng>,
) -> Result<Tensor<T>> {
    match rng {
        Some(r) if rate > 0.0 => x.dropout(rate, r),
        _ => Ok(x),
    }
}

/// Multi-head self-attention over `[B, N, C]`, returning the output and the
/// row-stochastic attention weights `[B, H, N, N]`.
pub fn mhsa_with_attention<T: Scalar>(
    x: &Tensor<T>,
    p: &AttentionParams<T>,
    heads: usize,
    dropout: f64,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let (b, n, c) = dims3(x)?;
    if heads == 0 || c % heads != 0 {
        return Err(Error::Contract(format!(
            "channel dim {c} is not divisible by {heads} heads"
        )));
    }
    let dk = c / heads;
    let split = |t: &Tensor<T>| -> Result<Tensor<T>> {
        // [B, N, C] -> [B, H, N, dk]
        t.reshape(&[b, n, heads, dk])?.permute(&[0, 2, 1, 3])
    };
    let q = split(&x.matmul(&p.w_q)?)?;
    let k = split(&x.matmul(&p.w_k)?)?;
    let v = split(&x.matmul(&p.w_v)?)?;
    let scores = q
        .matmul(&k.permute(&[0, 1, 3, 2])?)?
        .scale(1.0 / (dk as f64).sqrt())?;
    let attn = scores.softmax(-1)?;
    let merged = attn
        .matmul(&v)?
        .permute(&[0, 2, 1, 3])?
        .reshape(&[b, n, c])?;
    let out = maybe_dropout(merged.matmul(&p.w_o)?, dropout, &mut rng)?;
    Ok((out, attn))
}

/// Multi-head self-attention over `[B, N, C]`.
pub fn mhsa<T: Scalar>(
    x: &Tensor<T>,
    p: &AttentionParams<T>,
    heads: usize,
    dropout: f64,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<Tensor<T>> {
    Ok(mhsa_with_attention(x, p, heads, dropout, rng)?.0)
}

/// `gelu(x W1 + b1) W2 + b2` with dropout after each linear layer.
pub fn ffn<T: Scalar>(
    x: &Tensor<T>,
    p: &FfnParams<T>,
    dropout: f64,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<Tensor<T>> {
    let h = x.matmul(&p.w1)?.add(&p.b1)?.gelu()?;
    let h = maybe_dropout(h, dropout, &mut rng)?;
    let out = h.matmul(&p.w2)?.add(&p.b2)?;
    maybe_dropout(out, dropout, &mut rng)
}

/// Pre-norm transformer encoder over the joint axis; frames fold into the
/// batch. Shape-preserving.
pub fn spatial_encoder<T: Scalar>(
    x: &Tensor<T>,
    p: &EncoderParams<T>,
    cfg: &BlockConfig,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<Tensor<T>> {
    let (b, f, j, c) = dims4(x)?;
    let flat = x.reshape(&[b * f, j, c])?;
    let att = mhsa(
        &flat.layer_norm(&p.ln1.gamma, &p.ln1.beta)?,
        &p.attn,
        cfg.heads,
        cfg.dropout,
        rng.as_deref_mut(),
    )?;
    let x1 = flat.add(&att)?;
    let x2 = x1.add(&ffn(
        &x1.layer_norm(&p.ln2.gamma, &p.ln2.beta)?,
        &p.ffn,
        cfg.dropout,
        rng,
    )?)?;
    x2.reshape(&[b, f, j, c])
}

fn temporal_encoder_impl<T: Scalar>(
    x: &Tensor<T>,
    p: &EncoderParams<T>,
    cfg: &BlockConfig,
    mut rng: Option<&mut ChaCha8Rng>,
    compress: bool,
) -> Result<Tensor<T>> {
    let (b, _f, j, c) = dims4(x)?;
    let normed = x.layer_norm(&p.ln1.gamma, &p.ln1.beta)?;
    // temporal axis last: [B, F, J, C] -> [B, J, C, F]
    let xhat = if compress {
        let signals = normed.permute(&[0, 2, 3, 1])?;
        let comp = spectral_compress(&signals, cfg.sigma)?;
        comp.permute(&[0, 1, 3, 2])? // [B, J, f, C]
    } else {
        normed.permute(&[0, 2, 1, 3])?
    };
    let f_out = xhat.shape()[2];
    // attention over the (compressed) temporal tokens, joints in the batch;
    // the residual operates on the compressed sequence itself
    let tokens = xhat.reshape(&[b * j, f_out, c])?;
    let att = mhsa(&tokens, &p.attn, cfg.heads, cfg.dropout, rng.as_deref_mut())?;
    let x1 = tokens.add(&att)?;
    let x2 = x1.add(&ffn(
        &x1.layer_norm(&p.ln2.gamma, &p.ln2.beta)?,
        &p.ffn,
        cfg.dropout,
        rng,
    )?)?;
    x2.reshape(&[b, j, f_out, c])?.permute(&[0, 2, 1, 3])
}

/// Spectral-compression encoder: `[B, F, J, C] -> [B, f, J, C]` with
/// `f = ceil(F * sigma)`.
pub fn sct_encoder<T: Scalar>(
    x: &Tensor<T>,
    p: &EncoderParams<T>,
    cfg: &BlockConfig,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<Tensor<T>> {
    temporal_encoder_impl(x, p, cfg, rng, true)
}

/// The same encoder with the spectral stage skipped: a plain pre-norm
/// temporal transformer. The no-compression baseline for equivalence tests
/// and throughput comparisons.
pub fn vanilla_encoder<T: Scalar>(
    x: &Tensor<T>,
    p: &EncoderParams<T>,
    cfg: &BlockConfig,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<Tensor<T>> {
    temporal_encoder_impl(x, p, cfg, rng, false)
}

/// Convex per-position gating of two equally shaped streams:
/// `w = softmax(concat(a, b) W)`, `out = w0 * a + w1 * b`.
pub fn adaptive_fusion<T: Scalar>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    p: &FusionParams<T>,
) -> Result<Tensor<T>> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            op: "adaptive_fusion",
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    let cat = Tensor::cat_last(&[a, b])?;
    let w = cat.matmul(&p.proj)?.softmax(-1)?;
    let w0 = w.narrow_last(0, 1)?;
    let w1 = w.narrow_last(1, 1)?;
    w0.mul(a)?.add(&w1.mul(b)?)
}

/// One dual-stream block. Branch 1 = temporal(spatial(x)), branch 2 =
/// spatial(temporal(x)), both ending at temporal length `ceil(F * sigma)`,
/// merged by adaptive fusion. Also returns the hidden features entering
/// branch 1's temporal stage (pre-LayerNorm), which the spectrum analysis
/// captures.
pub fn dual_stream_block_captured<T: Scalar>(
    x: &Tensor<T>,
    p: &BlockParams<T>,
    cfg: &BlockConfig,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    cfg.validate()?;
    let spatial_out = spatial_encoder(x, &p.spatial_a, cfg, rng.as_deref_mut())?;
    let branch1 = sct_encoder(&spatial_out, &p.temporal_a, cfg, rng.as_deref_mut())?;
    let compressed = sct_encoder(x, &p.temporal_b, cfg, rng.as_deref_mut())?;
    let branch2 = spatial_encoder(&compressed, &p.spatial_b, cfg, rng)?;
    let fused = adaptive_fusion(&branch1, &branch2, &p.fusion)?;
    Ok((fused, spatial_out))
}

/// One dual-stream block: `[B, F, J, C] -> [B, ceil(F * sigma), J, C]`.
pub fn dual_stream_block<T: Scalar>(
    x: &Tensor<T>,
    p: &BlockParams<T>,
    cfg: &BlockConfig,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<Tensor<T>> {
    Ok(dual_stream_block_captured(x, p, cfg, rng)?.0)
}

/// The same dual-stream block with the spectral stage disabled in both
/// temporal encoders: sequence length is preserved. The uncompressed
/// baseline stack is built from this.
pub fn dual_stream_block_vanilla<T: Scalar>(
    x: &Tensor<T>,
    p: &BlockParams<T>,
    cfg: &BlockConfig,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<Tensor<T>> {
    cfg.validate()?;
    let spatial_out = spatial_encoder(x, &p.spatial_a, cfg, rng.as_deref_mut())?;
    let branch1 = vanilla_encoder(&spatial_out, &p.temporal_a, cfg, rng.as_deref_mut())?;
    let temporal_out = vanilla_encoder(x, &p.temporal_b, cfg, rng.as_deref_mut())?;
    let branch2 = spatial_encoder(&temporal_out, &p.spatial_b, cfg, rng)?;
    adaptive_fusion(&branch1, &branch2, &p.fusion)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::spectral_compress;
    use rand::{Rng, SeedableRng};

    fn cfg(c: usize, h: usize, sigma: f64) -> BlockConfig {
        BlockConfig {
            channels: c,
            heads: h,
            mlp_ratio: 4,
            sigma,
            dropout: 0.0,
        }
    }

    fn rand_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor::from_vec(data, shape, false).unwrap()
    }

    #[test]
    fn single_token_attention_is_identity_weighted() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = EncoderParams::<f64>::init(4, 4, &mut rng);
        let x = rand_tensor(&[1, 1, 4], &mut rng);
        let (out, attn) = mhsa_with_attention(&x, &p.attn, 2, 0.0, None).unwrap();
        assert_eq!(attn.to_vec(), vec![1.0, 1.0]); // [1, 2, 1, 1]
        // out = (x Wv) Wo for the single token
        let expect = x.matmul(&p.attn.w_v).unwrap().matmul(&p.attn.w_o).unwrap();
        for (a, b) in out.to_vec().iter().zip(expect.to_vec()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_tokens_attend_uniformly() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = EncoderParams::<f64>::init(4, 4, &mut rng);
        let row: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut data = Vec::new();
        for _ in 0..5 {
            data.extend_from_slice(&row);
        }
        let x = Tensor::from_vec(data, &[1, 5, 4], false).unwrap();
        let (_, attn) = mhsa_with_attention(&x, &p.attn, 2, 0.0, None).unwrap();
        for v in attn.to_vec() {
            assert!((v - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn mhsa_matches_straight_line_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (b, n, c, h) = (1usize, 3usize, 4usize, 2usize);
        let p = EncoderParams::<f64>::init(c, 4, &mut rng);
        let x = rand_tensor(&[b, n, c], &mut rng);
        let (out, _) = mhsa_with_attention(&x, &p.attn, h, 0.0, None).unwrap();

        // formula-by-formula oracle with plain loops
        let xd = x.to_vec();
        let wq = p.attn.w_q.to_vec();
        let wk = p.attn.w_k.to_vec();
        let wv = p.attn.w_v.to_vec();
        let wo = p.attn.w_o.to_vec();
        let proj = |w: &[f64]| -> Vec<f64> {
            let mut y = vec![0.0; n * c];
            for i in 0..n {
                for jo in 0..c {
                    for ki in 0..c {
                        y[i * c + jo] += xd[i * c + ki] * w[ki * c + jo];
                    }
                }
            }
            y
        };
        let (q, k, v) = (proj(&wq), proj(&wk), proj(&wv));
        let dk = c / h;
        let mut concat = vec![0.0; n * c];
        for head in 0..h {
            let off = head * dk;
            // scores, softmax, context for this head
            for i in 0..n {
                let mut row = vec![0.0; n];
                for j in 0..n {
                    let mut s = 0.0;
                    for d in 0..dk {
                        s += q[i * c + off + d] * k[j * c + off + d];
                    }
                    row[j] = s / (dk as f64).sqrt();
                }
                let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = row.iter().map(|s| (s - mx).exp()).sum();
                for j in 0..n {
                    let a = (row[j] - mx).exp() / z;
                    for d in 0..dk {
                        concat[i * c + off + d] += a * v[j * c + off + d];
                    }
                }
            }
        }
        let mut expect = vec![0.0; n * c];
        for i in 0..n {
            for jo in 0..c {
                for ki in 0..c {
                    expect[i * c + jo] += concat[i * c + ki] * wo[ki * c + jo];
                }
            }
        }
        for (got, want) in out.to_vec().iter().zip(&expect) {
            assert!((got - want).abs() < 1e-5, "{got} vs {want}");
        }
    }

    #[test]
    fn attention_rows_are_stochastic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = EncoderParams::<f64>::init(8, 4, &mut rng);
        let x = rand_tensor(&[2, 6, 8], &mut rng);
        let (_, attn) = mhsa_with_attention(&x, &p.attn, 4, 0.0, None).unwrap();
        let a = attn.to_vec();
        for row in a.chunks(6) {
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn sct_encoder_compresses_to_ceil() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = cfg(8, 2, 0.6);
        let p = EncoderParams::<f64>::init(8, 4, &mut rng);
        let x = rand_tensor(&[1, 27, 3, 8], &mut rng);
        let y = sct_encoder(&x, &p, &c, None).unwrap();
        assert_eq!(y.shape(), &[1, 17, 3, 8]);
    }

    #[test]
    fn zero_weights_reduce_to_compressed_layernorm() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let c = cfg(8, 2, 0.6);
        let p = EncoderParams::<f64>::zeroed(8, 4);
        let x = rand_tensor(&[2, 9, 3, 8], &mut rng);
        let y = sct_encoder(&x, &p, &c, None).unwrap();
        let normed = x.layer_norm(&p.ln1.gamma, &p.ln1.beta).unwrap();
        let expect = spectral_compress(&normed.permute(&[0, 2, 3, 1]).unwrap(), c.sigma)
            .unwrap()
            .permute(&[0, 1, 3, 2])
            .unwrap()
            .permute(&[0, 2, 1, 3])
            .unwrap();
        for (a, b) in y.to_vec().iter().zip(expect.to_vec()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn no_truncation_equals_vanilla_encoder() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let frames = 27;
        // sigma with ceil(F * sigma) = F
        let c = cfg(8, 2, 0.99);
        assert_eq!(crate::spectral::compressed_len(frames, c.sigma), frames);
        let p = EncoderParams::<f64>::init(8, 4, &mut rng);
        let x = rand_tensor(&[1, frames, 3, 8], &mut rng);
        let sct = sct_encoder(&x, &p, &c, None).unwrap();
        let vanilla = vanilla_encoder(&x, &p, &c, None).unwrap();
        assert_eq!(sct.shape(), vanilla.shape());
        for (a, b) in sct.to_vec().iter().zip(vanilla.to_vec()) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn spatial_encoder_zero_weights_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c = cfg(8, 2, 0.6);
        let p = EncoderParams::<f64>::zeroed(8, 4);
        let x = rand_tensor(&[2, 4, 5, 8], &mut rng);
        let y = spatial_encoder(&x, &p, &c, None).unwrap();
        assert_eq!(y.to_vec(), x.to_vec());
    }

    #[test]
    fn spatial_encoder_single_joint_reduces_to_residual_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = cfg(8, 2, 0.6);
        let p = EncoderParams::<f64>::init(8, 4, &mut rng);
        let x = rand_tensor(&[1, 3, 1, 8], &mut rng);
        let y = spatial_encoder(&x, &p, &c, None).unwrap();
        // J = 1: attention output is (LN(x) Wv) Wo per token
        let flat = x.reshape(&[3, 1, 8]).unwrap();
        let n = flat.layer_norm(&p.ln1.gamma, &p.ln1.beta).unwrap();
        let att = n.matmul(&p.attn.w_v).unwrap().matmul(&p.attn.w_o).unwrap();
        let x1 = flat.add(&att).unwrap();
        let expect = x1
            .add(
                &ffn(
                    &x1.layer_norm(&p.ln2.gamma, &p.ln2.beta).unwrap(),
                    &p.ffn,
                    0.0,
                    None,
                )
                .unwrap(),
            )
            .unwrap();
        for (a, b) in y.to_vec().iter().zip(expect.to_vec()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn fusion_of_equal_inputs_is_that_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let p = FusionParams::<f64>::init(4, &mut rng);
        let a = rand_tensor(&[1, 2, 3, 4], &mut rng);
        let out = adaptive_fusion(&a, &a, &p).unwrap();
        for (x, y) in out.to_vec().iter().zip(a.to_vec()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_fusion_weights_average_the_streams() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = FusionParams::<f64>::zeroed(4);
        let a = rand_tensor(&[1, 2, 3, 4], &mut rng);
        let b = rand_tensor(&[1, 2, 3, 4], &mut rng);
        let out = adaptive_fusion(&a, &b, &p).unwrap();
        for ((x, y), z) in a.to_vec().iter().zip(b.to_vec()).zip(out.to_vec()) {
            assert!((0.5 * (x + y) - z).abs() < 1e-12);
        }
    }

    #[test]
    fn fusion_matches_direct_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let c = 4usize;
        let p = FusionParams::<f64>::init(c, &mut rng);
        let a = rand_tensor(&[1, 2, 3, c], &mut rng);
        let b = rand_tensor(&[1, 2, 3, c], &mut rng);
        let out = adaptive_fusion(&a, &b, &p).unwrap().to_vec();
        let (ad, bd, w) = (a.to_vec(), b.to_vec(), p.proj.to_vec());
        for pos in 0..6 {
            let mut logits = [0.0f64; 2];
            for o in 0..2 {
                for i in 0..c {
                    logits[o] += ad[pos * c + i] * w[i * 2 + o];
                    logits[o] += bd[pos * c + i] * w[(c + i) * 2 + o];
                }
            }
            let mx = logits[0].max(logits[1]);
            let z = (logits[0] - mx).exp() + (logits[1] - mx).exp();
            let w0 = (logits[0] - mx).exp() / z;
            let w1 = (logits[1] - mx).exp() / z;
            for i in 0..c {
                let want = w0 * ad[pos * c + i] + w1 * bd[pos * c + i];
                assert!((out[pos * c + i] - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn fusion_output_stays_in_elementwise_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let p = FusionParams::<f64>::init(4, &mut rng);
        let a = rand_tensor(&[2, 3, 2, 4], &mut rng);
        let b = rand_tensor(&[2, 3, 2, 4], &mut rng);
        let out = adaptive_fusion(&a, &b, &p).unwrap().to_vec();
        for ((x, y), z) in a.to_vec().iter().zip(b.to_vec()).zip(out) {
            let (lo, hi) = (x.min(y), x.max(y));
            assert!(z >= lo - 1e-12 && z <= hi + 1e-12);
        }
    }

    #[test]
    fn dual_stream_shapes_and_zero_weight_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let c = cfg(8, 2, 0.6);
        let x = rand_tensor(&[1, 27, 3, 8], &mut rng);
        let p = BlockParams::<f64>::init(&c, &mut rng);
        let y = dual_stream_block(&x, &p, &c, None).unwrap();
        assert_eq!(y.shape(), &[1, 17, 3, 8]);

        // zero weights: both branches reduce to compress(LN(x)); fusion of
        // equal inputs returns that value
        let pz = BlockParams::<f64>::zeroed(&c);
        let yz = dual_stream_block(&x, &pz, &c, None).unwrap();
        let normed = x
            .layer_norm(&pz.temporal_b.ln1.gamma, &pz.temporal_b.ln1.beta)
            .unwrap();
        let expect = spectral_compress(&normed.permute(&[0, 2, 3, 1]).unwrap(), c.sigma)
            .unwrap()
            .permute(&[0, 1, 3, 2])
            .unwrap()
            .permute(&[0, 2, 1, 3])
            .unwrap();
        for (a, b) in yz.to_vec().iter().zip(expect.to_vec()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn heads_must_divide_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let p = EncoderParams::<f64>::init(6, 4, &mut rng);
        let x = rand_tensor(&[1, 2, 6], &mut rng);
        assert!(mhsa(&x, &p.attn, 4, 0.0, None).is_err());
    }
}
