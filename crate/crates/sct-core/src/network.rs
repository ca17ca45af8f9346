//! The full lifting model: embedding with positional encodings, a stack of
//! progressively compressing dual-stream blocks, per-layer interpolation
//! upsampling back to the input length, aggregation, and the regression
//! head. Also the training losses.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::block::{dual_stream_block_captured, BlockConfig, BlockParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spectral::{compressed_len, dct_last_axis};
use crate::tensor::Tensor;

/// Every hyperparameter of the model and its training run.
#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub layers: usize,
    pub channels: usize,
    pub frames: usize,
    pub joints: usize,
    pub sigma: f64,
    pub heads: usize,
    /// Weight of the frequency-domain loss.
    pub lambda: f64,
    pub dropout: f64,
    pub mlp_ratio: usize,
    /// Concatenate line-pose bone channels to the input (5 channels when on,
    /// 3 when off).
    pub lpg: bool,
    pub lr: f64,
    pub lr_decay: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Horizontal-flip augmentation during training.
    pub flip: bool,
    pub seed: u64,
}

impl ModelConfig {
    /// The published full-scale configuration. Used for compute accounting
    /// and benchmarks, not for desk-scale training.
    pub fn paper() -> Self {
        ModelConfig {
            layers: 5,
            channels: 512,
            frames: 243,
            joints: 17,
            sigma: 0.6,
            heads: 8,
            lambda: 1.0,
            dropout: 0.1,
            mlp_ratio: 4,
            lpg: true,
            lr: 2e-4,
            lr_decay: 0.99,
            weight_decay: 0.01,
            batch_size: 16,
            epochs: 120,
            flip: true,
            seed: 0,
        }
    }

    /// Small configuration that trains in minutes on a laptop CPU.
    pub fn desk() -> Self {
        ModelConfig {
            layers: 2,
            channels: 32,
            frames: 27,
            joints: 17,
            sigma: 0.6,
            heads: 4,
            lambda: 1.0,
            dropout: 0.0,
            mlp_ratio: 4,
            lpg: true,
            lr: 2e-3,
            lr_decay: 0.99,
            weight_decay: 0.01,
            batch_size: 16,
            epochs: 500,
            flip: false,
            seed: 42,
        }
    }

    pub fn validate(&self) -> Result<()> {
        crate::contract!(self.layers >= 1, "need at least one layer");
        crate::contract!(self.frames >= 1 && self.joints >= 1, "frames and joints must be positive");
        crate::contract!(self.lambda >= 0.0, "lambda must be non-negative, got {}", self.lambda);
        crate::contract!(self.lr >= 0.0, "learning rate must be non-negative, got {}", self.lr);
        crate::contract!(
            self.lr_decay > 0.0 && self.weight_decay >= 0.0 && self.batch_size >= 1,
            "invalid optimizer settings (lr_decay {}, weight_decay {}, batch_size {})",
            self.lr_decay,
            self.weight_decay,
            self.batch_size
        );
        self.block_config().validate()?;
        let schedule = self.schedule();
        crate::contract!(
            *schedule.last().unwrap() >= 1,
            "compression schedule collapses to zero length: {:?}",
            schedule
        );
        Ok(())
    }

    pub fn block_config(&self) -> BlockConfig {
        BlockConfig {
            channels: self.channels,
            heads: self.heads,
            mlp_ratio: self.mlp_ratio,
            sigma: self.sigma,
            dropout: self.dropout,
        }
    }

    /// Temporal lengths `[f_0 = F, f_1, ..., f_L]` under the ceil recurrence.
    pub fn schedule(&self) -> Vec<usize> {
        self.schedule_for(self.frames)
    }

    /// The same recurrence starting from an arbitrary input length.
    pub fn schedule_for(&self, frames: usize) -> Vec<usize> {
        let mut v = Vec::with_capacity(self.layers + 1);
        v.push(frames);
        for _ in 0..self.layers {
            v.push(compressed_len(*v.last().unwrap(), self.sigma));
        }
        v
    }

    pub fn input_channels(&self) -> usize {
        if self.lpg {
            5
        } else {
            3
        }
    }
}

/// Hidden tensors produced by one forward pass: the embedding output at full
/// length plus each block's output at its compressed length, and the
/// (pre-LayerNorm) inputs to each block's temporal stage for spectrum
/// analysis.
pub struct LayerActivations<T: Scalar> {
    pub embedding: Tensor<T>,
    pub block_outputs: Vec<Tensor<T>>,
    pub temporal_inputs: Vec<Tensor<T>>,
}

/// The model: all trainable parameters plus the configuration.
pub struct Model<T: Scalar> {
    pub cfg: ModelConfig,
    pub embed_w: Tensor<T>,
    pub pos_temporal: Tensor<T>,
    pub pos_spatial: Tensor<T>,
    pub blocks: Vec<BlockParams<T>>,
    pub head_w: Tensor<T>,
}

const INIT_STD: f64 = 0.02;

impl<T: Scalar> Model<T> {
    /// Fresh model with normal(0, 0.02) projections and positional
    /// encodings, zero biases, identity LayerNorm affines. Deterministic in
    /// `cfg.seed`.
    pub fn init(cfg: ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let bc = cfg.block_config();
        Ok(Model {
            embed_w: Tensor::param_randn(&[cfg.input_channels(), cfg.channels], INIT_STD, &mut rng),
            pos_temporal: Tensor::param_randn(&[cfg.frames, cfg.channels], INIT_STD, &mut rng),
            pos_spatial: Tensor::param_randn(&[cfg.joints, cfg.channels], INIT_STD, &mut rng),
            blocks: (0..cfg.layers).map(|_| BlockParams::init(&bc, &mut rng)).collect(),
            head_w: Tensor::param_randn(&[cfg.channels, 3], INIT_STD, &mut rng),
            cfg,
        })
    }

    pub fn named_parameters(&self) -> Vec<(String, Tensor<T>)> {
        let mut out = vec![
            ("embed.w".to_string(), self.embed_w.clone()),
            ("embed.pos_temporal".to_string(), self.pos_temporal.clone()),
            ("embed.pos_spatial".to_string(), self.pos_spatial.clone()),
        ];
        for (i, b) in self.blocks.iter().enumerate() {
            b.named(&format!("blocks.{i}"), &mut out);
        }
        out.push(("head.w_o".to_string(), self.head_w.clone()));
        out
    }

    pub fn parameters(&self) -> Vec<Tensor<T>> {
        self.named_parameters().into_iter().map(|(_, t)| t).collect()
    }

    /// Inference copy whose parameters do not record gradients.
    pub fn detached(&self) -> Model<T> {
        let detached_params: Vec<(String, Tensor<T>)> = self
            .named_parameters()
            .into_iter()
            .map(|(n, t)| (n, t.detach()))
            .collect();
        let mut fresh = Model::init(self.cfg.clone()).expect("config was already validated");
        fresh.replace_params(&detached_params);
        fresh
    }

    fn replace_params(&mut self, params: &[(String, Tensor<T>)]) {
        let lookup: std::collections::HashMap<&str, &Tensor<T>> =
            params.iter().map(|(n, t)| (n.as_str(), t)).collect();
        self.embed_w = lookup["embed.w"].clone();
        self.pos_temporal = lookup["embed.pos_temporal"].clone();
        self.pos_spatial = lookup["embed.pos_spatial"].clone();
        self.head_w = lookup["head.w_o"].clone();
        for (i, b) in self.blocks.iter_mut().enumerate() {
            let g = |suffix: &str| lookup[format!("blocks.{i}.{suffix}").as_str()].clone();
            for (enc, name) in [
                (&mut b.spatial_a, "spatial_a"),
                (&mut b.temporal_a, "temporal_a"),
                (&mut b.temporal_b, "temporal_b"),
                (&mut b.spatial_b, "spatial_b"),
            ] {
                enc.ln1.gamma = g(&format!("{name}.ln1.gamma"));
                enc.ln1.beta = g(&format!("{name}.ln1.beta"));
                enc.attn.w_q = g(&format!("{name}.attn.w_q"));
                enc.attn.w_k = g(&format!("{name}.attn.w_k"));
                enc.attn.w_v = g(&format!("{name}.attn.w_v"));
                enc.attn.w_o = g(&format!("{name}.attn.w_o"));
                enc.ln2.gamma = g(&format!("{name}.ln2.gamma"));
                enc.ln2.beta = g(&format!("{name}.ln2.beta"));
                enc.ffn.w1 = g(&format!("{name}.ffn.w1"));
                enc.ffn.b1 = g(&format!("{name}.ffn.b1"));
                enc.ffn.w2 = g(&format!("{name}.ffn.w2"));
                enc.ffn.b2 = g(&format!("{name}.ffn.b2"));
            }
            b.fusion.proj = g("fusion.proj");
        }
    }

    /// Linear projection of the input channels plus learnable temporal and
    /// spatial positional encodings.
    pub fn embed(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let s = input.shape();
        crate::contract!(
            s.len() == 4,
            "embed expects [B, F, J, channels], got {:?}",
            s
        );
        let (b, f, j, c_in) = (s[0], s[1], s[2], s[3]);
        crate::contract!(
            c_in == self.cfg.input_channels(),
            "input has {c_in} channels, config expects {}",
            self.cfg.input_channels()
        );
        crate::contract!(
            j == self.cfg.joints,
            "input has {j} joints, config expects {}",
            self.cfg.joints
        );
        crate::contract!(
            f <= self.cfg.frames,
            "input length {f} exceeds the configured maximum {}",
            self.cfg.frames
        );
        let c = self.cfg.channels;
        let projected = input.matmul(&self.embed_w)?;
        // first f rows of the temporal encoding, broadcast over joints
        let pos_t = self
            .pos_temporal
            .permute(&[1, 0])?
            .narrow_last(0, f)?
            .permute(&[1, 0])?
            .reshape(&[1, f, 1, c])?;
        let pos_s = self.pos_spatial.reshape(&[1, 1, j, c])?;
        let _ = b;
        projected.add(&pos_t)?.add(&pos_s)
    }

    /// Forward pass with the spectral compression disabled in every block:
    /// the uncompressed baseline at identical width and depth.
    pub fn forward_vanilla(
        &self,
        input: &Tensor<T>,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Tensor<T>> {
        let bc = self.cfg.block_config();
        let embedding = self.embed(input)?;
        let mut h = embedding.clone();
        let mut total = embedding;
        for params in &self.blocks {
            h = crate::block::dual_stream_block_vanilla(&h, params, &bc, rng.as_deref_mut())?;
            total = total.add(&h)?;
        }
        total.matmul(&self.head_w)
    }

    /// Full forward pass: `[B, F, J, channels] -> [B, F, J, 3]` plus the
    /// per-layer activations. Pass an RNG to enable dropout (training);
    /// `None` runs deterministic evaluation.
    pub fn forward(
        &self,
        input: &Tensor<T>,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Tensor<T>, LayerActivations<T>)> {
        let bc = self.cfg.block_config();
        let embedding = self.embed(input)?;
        let full_len = embedding.shape()[1];
        let mut block_outputs = Vec::with_capacity(self.cfg.layers);
        let mut temporal_inputs = Vec::with_capacity(self.cfg.layers);
        let mut h = embedding.clone();
        for params in &self.blocks {
            let (out, tin) = dual_stream_block_captured(&h, params, &bc, rng.as_deref_mut())?;
            temporal_inputs.push(tin);
            block_outputs.push(out.clone());
            h = out;
        }
        // restore every stream to full length and aggregate
        let mut total = upsample_linear(&embedding, full_len)?;
        for out in &block_outputs {
            total = total.add(&upsample_linear(out, full_len)?)?;
        }
        let pose = total.matmul(&self.head_w)?;
        Ok((
            pose,
            LayerActivations {
                embedding,
                block_outputs,
                temporal_inputs,
            },
        ))
    }
}

/// Align-corners linear interpolation along the temporal axis:
/// `[B, f, J, C] -> [B, target, J, C]`. Output position `t` reads source
/// coordinate `t * (f-1) / (target-1)`; a single input frame broadcasts.
/// Exact on signals affine in time.
pub fn upsample_linear<T: Scalar>(h: &Tensor<T>, target: usize) -> Result<Tensor<T>> {
    let s = h.shape();
    crate::contract!(s.len() == 4, "upsample_linear expects [B, f, J, C], got {:?}", s);
    let (b, f, j, c) = (s[0], s[1], s[2], s[3]);
    crate::contract!(f >= 1, "upsample_linear on empty temporal axis");
    if f > target {
        return Err(Error::Contract(format!(
            "upsample_linear cannot shrink: source {f} > target {target}"
        )));
    }
    // (left index, weight of the right neighbor) per output position
    let taps: Vec<(usize, T)> = (0..target)
        .map(|t| {
            if f == 1 || target == 1 {
                (0usize, T::zero())
            } else {
                let src = t as f64 * (f - 1) as f64 / (target - 1) as f64;
                let i0 = (src.floor() as usize).min(f - 1);
                (i0, T::from_f64(src - i0 as f64))
            }
        })
        .collect();
    let row = j * c;
    let x = h.data();
    let mut data = vec![T::zero(); b * target * row];
    for bi in 0..b {
        for (t, &(i0, w)) in taps.iter().enumerate() {
            let i1 = (i0 + 1).min(f - 1);
            let src0 = &x[(bi * f + i0) * row..(bi * f + i0) * row + row];
            let src1 = &x[(bi * f + i1) * row..(bi * f + i1) * row + row];
            let dst = &mut data[(bi * target + t) * row..(bi * target + t) * row + row];
            let w0 = T::one() - w;
            for ((d, &a), &bv) in dst.iter_mut().zip(src0).zip(src1) {
                *d = w0 * a + w * bv;
            }
        }
    }
    drop(x);
    let taps_b = taps.clone();
    Tensor::from_op(
        data,
        vec![b, target, j, c],
        vec![h.clone()],
        Box::new(move |ctx| {
            let mut dh = vec![T::zero(); b * f * row];
            for bi in 0..b {
                for (t, &(i0, w)) in taps_b.iter().enumerate() {
                    let i1 = (i0 + 1).min(f - 1);
                    let g = &ctx.grad[(bi * target + t) * row..(bi * target + t) * row + row];
                    let w0 = T::one() - w;
                    for (k, &gv) in g.iter().enumerate() {
                        dh[(bi * f + i0) * row + k] += w0 * gv;
                        dh[(bi * f + i1) * row + k] += w * gv;
                    }
                }
            }
            vec![Some(dh)]
        }),
        "upsample_linear",
    )
}

/// Mean over batch, frames and joints of the per-joint Euclidean error.
pub fn mpjpe_loss<T: Scalar>(pred: &Tensor<T>, gt: &Tensor<T>) -> Result<Tensor<T>> {
    if pred.shape() != gt.shape() {
        return Err(Error::ShapeMismatch {
            op: "mpjpe_loss",
            lhs: pred.shape().to_vec(),
            rhs: gt.shape().to_vec(),
        });
    }
    pred.sub(gt)?.l2_norm_last()?.mean_all()
}

/// Frequency-domain loss: orthonormal DCT along the full temporal axis per
/// joint and coordinate, then the mean (over batch, frequencies, joints) of
/// the 3-coordinate norm of the coefficient difference.
pub fn fd_loss<T: Scalar>(pred: &Tensor<T>, gt: &Tensor<T>) -> Result<Tensor<T>> {
    if pred.shape() != gt.shape() {
        return Err(Error::ShapeMismatch {
            op: "fd_loss",
            lhs: pred.shape().to_vec(),
            rhs: gt.shape().to_vec(),
        });
    }
    crate::contract!(
        pred.shape().len() == 4,
        "fd_loss expects [B, F, J, 3], got {:?}",
        pred.shape()
    );
    // DCT(pred) - DCT(gt) = DCT(pred - gt): one transform on the difference
    let diff = pred.sub(gt)?;
    let coeffs = dct_last_axis(&diff.permute(&[0, 2, 3, 1])?)?;
    coeffs.permute(&[0, 3, 1, 2])?.l2_norm_last()?.mean_all()
}

/// `mpjpe + lambda * fd`.
pub fn total_loss<T: Scalar>(pred: &Tensor<T>, gt: &Tensor<T>, lambda: f64) -> Result<Tensor<T>> {
    crate::contract!(lambda >= 0.0, "lambda must be non-negative, got {lambda}");
    let m = mpjpe_loss(pred, gt)?;
    if lambda == 0.0 {
        return Ok(m);
    }
    m.add(&fd_loss(pred, gt)?.scale(lambda)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn tiny_cfg() -> ModelConfig {
        ModelConfig {
            layers: 2,
            channels: 16,
            frames: 9,
            joints: 5,
            sigma: 0.6,
            heads: 2,
            lambda: 1.0,
            dropout: 0.0,
            mlp_ratio: 4,
            lpg: true,
            lr: 1e-3,
            lr_decay: 0.99,
            weight_decay: 0.01,
            batch_size: 2,
            epochs: 1,
            flip: false,
            seed: 7,
        }
    }

    fn rand_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor::from_vec(data, shape, false).unwrap()
    }

    #[test]
    fn paper_schedule_matches_ceiling_recurrence() {
        let cfg = ModelConfig::paper();
        assert_eq!(cfg.schedule(), vec![243, 146, 88, 53, 32, 20]);
    }

    #[test]
    fn desk_schedule() {
        let cfg = ModelConfig::desk();
        assert_eq!(cfg.schedule(), vec![27, 17, 11]);
    }

    #[test]
    fn forward_shapes_and_activation_lengths() {
        let cfg = tiny_cfg();
        let model = Model::<f64>::init(cfg.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = rand_tensor(&[2, 9, 5, 5], &mut rng);
        let (pose, acts) = model.forward(&x, None).unwrap();
        assert_eq!(pose.shape(), &[2, 9, 5, 3]);
        let schedule = cfg.schedule();
        assert_eq!(acts.embedding.shape()[1], schedule[0]);
        for (i, out) in acts.block_outputs.iter().enumerate() {
            assert_eq!(out.shape()[1], schedule[i + 1], "block {i}");
        }
        for (i, tin) in acts.temporal_inputs.iter().enumerate() {
            assert_eq!(tin.shape()[1], schedule[i], "temporal input {i}");
        }
    }

    #[test]
    fn zero_weight_network_outputs_zero() {
        let cfg = tiny_cfg();
        let mut model = Model::<f64>::init(cfg.clone()).unwrap();
        for (_, p) in model.named_parameters() {
            p.set_data(&vec![0.0; p.numel()]).unwrap();
        }
        // LayerNorm gammas back to one so the forward stays well-defined;
        // the head is zero, so the output must be zero
        for b in &mut model.blocks {
            for enc in [&b.spatial_a, &b.temporal_a, &b.temporal_b, &b.spatial_b] {
                enc.ln1.gamma.set_data(&vec![1.0; 16]).unwrap();
                enc.ln2.gamma.set_data(&vec![1.0; 16]).unwrap();
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = rand_tensor(&[1, 9, 5, 5], &mut rng);
        let (pose, _) = model.forward(&x, None).unwrap();
        assert!(pose.to_vec().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn embed_rejects_overlong_input() {
        let cfg = tiny_cfg();
        let model = Model::<f64>::init(cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = rand_tensor(&[1, 10, 5, 5], &mut rng);
        assert!(model.embed(&x).is_err());
    }

    #[test]
    fn embedding_is_per_position() {
        let cfg = tiny_cfg();
        let model = Model::<f64>::init(cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = rand_tensor(&[1, 9, 5, 5], &mut rng);
        let mut bd = a.to_vec();
        // change frame 4 only
        for j in 0..5 {
            for c in 0..5 {
                bd[(4 * 5 + j) * 5 + c] += 0.5;
            }
        }
        let b = Tensor::from_vec(bd, &[1, 9, 5, 5], false).unwrap();
        let ea = model.embed(&a).unwrap().to_vec();
        let eb = model.embed(&b).unwrap().to_vec();
        let row = 5 * 16;
        for t in 0..9 {
            let differs = ea[t * row..(t + 1) * row]
                .iter()
                .zip(&eb[t * row..(t + 1) * row])
                .any(|(x, y)| (x - y).abs() > 1e-12);
            assert_eq!(differs, t == 4, "frame {t}");
        }
    }

    #[test]
    fn upsample_identity_when_lengths_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = rand_tensor(&[2, 5, 3, 4], &mut rng);
        let y = upsample_linear(&x, 5).unwrap();
        assert_eq!(x.to_vec(), y.to_vec());
    }

    #[test]
    fn upsample_reconstructs_linear_ramp() {
        // ramp 0, 1, 2 upsampled to 5 -> 0, 0.5, 1, 1.5, 2
        let x = Tensor::<f64>::from_vec(vec![0.0, 1.0, 2.0], &[1, 3, 1, 1], false).unwrap();
        let y = upsample_linear(&x, 5).unwrap();
        let want = [0.0, 0.5, 1.0, 1.5, 2.0];
        for (a, b) in y.to_vec().iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn upsample_broadcasts_single_frame() {
        let x = Tensor::<f64>::from_vec(vec![1.5, -2.0], &[1, 1, 1, 2], false).unwrap();
        let y = upsample_linear(&x, 4).unwrap();
        assert_eq!(y.shape(), &[1, 4, 1, 2]);
        for chunk in y.to_vec().chunks(2) {
            assert_eq!(chunk, &[1.5, -2.0]);
        }
    }

    #[test]
    fn upsample_rejects_shrinking() {
        let x = Tensor::<f64>::zeros(&[1, 5, 1, 1]);
        assert!(upsample_linear(&x, 3).is_err());
    }

    #[test]
    fn mpjpe_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gt = rand_tensor(&[1, 2, 2, 3], &mut rng);
        assert_eq!(mpjpe_loss(&gt, &gt).unwrap().item().unwrap(), 0.0);

        // one joint of four offset by (3, 4, 0): loss = 5 / 4
        let mut pd = gt.to_vec();
        pd[0] += 3.0;
        pd[1] += 4.0;
        let pred = Tensor::from_vec(pd, &[1, 2, 2, 3], false).unwrap();
        let loss = mpjpe_loss(&pred, &gt).unwrap().item().unwrap();
        assert!((loss - 5.0 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn mpjpe_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pred = rand_tensor(&[2, 3, 4, 3], &mut rng);
        let gt = rand_tensor(&[2, 3, 4, 3], &mut rng);
        let got = mpjpe_loss(&pred, &gt).unwrap().item().unwrap();
        let (p, g) = (pred.to_vec(), gt.to_vec());
        let mut acc = 0.0;
        for i in 0..2 * 3 * 4 {
            let mut s = 0.0;
            for d in 0..3 {
                let diff = p[i * 3 + d] - g[i * 3 + d];
                s += diff * diff;
            }
            acc += s.sqrt();
        }
        acc /= (2 * 3 * 4) as f64;
        assert!((got - acc).abs() < 1e-6);
    }

    #[test]
    fn fd_loss_zero_on_equal_and_parseval_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let gt = rand_tensor(&[1, 8, 2, 3], &mut rng);
        assert_eq!(fd_loss(&gt, &gt).unwrap().item().unwrap(), 0.0);

        // Parseval: sum over frequencies of squared 3-vector norms equals
        // the time-domain sum, per joint
        let pred = rand_tensor(&[1, 8, 2, 3], &mut rng);
        let diff = pred.sub(&gt).unwrap();
        let coeffs = dct_last_axis(&diff.permute(&[0, 2, 3, 1]).unwrap()).unwrap();
        let time_sq: f64 = diff.to_vec().iter().map(|v| v * v).sum();
        let freq_sq: f64 = coeffs.to_vec().iter().map(|v| v * v).sum();
        assert!((time_sq - freq_sq).abs() < 1e-9 * time_sq.max(1.0));
    }

    #[test]
    fn fd_loss_dc_shift() {
        // adding d to every frame of one joint coordinate changes only the
        // k = 0 term, by sqrt(F) * |d| / (F * J)
        let (frames, joints) = (8usize, 2usize);
        let gt = Tensor::<f64>::zeros(&[1, frames, joints, 3]);
        let d = 0.7f64;
        let mut pd = vec![0.0; frames * joints * 3];
        for f in 0..frames {
            pd[(f * joints) * 3 + 1] = d; // joint 0, y coordinate
        }
        let pred = Tensor::from_vec(pd, &[1, frames, joints, 3], false).unwrap();
        let got = fd_loss(&pred, &gt).unwrap().item().unwrap();
        let want = (frames as f64).sqrt() * d / (frames * joints) as f64;
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }

    #[test]
    fn total_loss_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pred = rand_tensor(&[1, 8, 2, 3], &mut rng);
        let gt = rand_tensor(&[1, 8, 2, 3], &mut rng);
        let m = mpjpe_loss(&pred, &gt).unwrap().item().unwrap();
        let f = fd_loss(&pred, &gt).unwrap().item().unwrap();
        let t0 = total_loss(&pred, &gt, 0.0).unwrap().item().unwrap();
        let t1 = total_loss(&pred, &gt, 1.0).unwrap().item().unwrap();
        assert!((t0 - m).abs() < 1e-12);
        assert!((t1 - (m + f)).abs() < 1e-9);
        assert_eq!(total_loss(&gt, &gt, 3.0).unwrap().item().unwrap(), 0.0);
        assert!(total_loss(&pred, &gt, -1.0).is_err());
    }
}
