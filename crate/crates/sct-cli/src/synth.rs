//! Synthetic motion clips: harmonic joint trajectories around a rest pose,
//! orthographically projected to 2D with optional detector-style noise.
//! Millimeter units throughout; stands in for motion-capture data at desk
//! scale.

use anyhow::{ensure, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use sct_core::lpg::{PoseSequence, SkeletonTopology};
use sct_core::scalar::Scalar;

/// One sinusoidal motion term for a joint: millimeter amplitudes per axis,
/// frequency in cycles per clip, phase in radians.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HarmonicTerm {
    pub amplitude: [f64; 3],
    pub frequency: f64,
    pub phase: f64,
}

/// Generator description. Deterministic in `seed`. When `harmonics` is
/// given (one term per joint) every clip shares that motion and clips differ
/// only in their 2D noise; otherwise terms are drawn per clip from the seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticMotionSpec {
    pub frames: usize,
    pub clips: usize,
    /// Standard deviation of the 2D observation noise, mm.
    #[serde(default)]
    pub noise_2d: f64,
    /// Probability that a joint observation is an outlier (detector miss).
    #[serde(default)]
    pub outlier_rate: f64,
    /// Outlier displacement scale, mm.
    #[serde(default)]
    pub outlier_mm: f64,
    pub seed: u64,
    /// Amplitude scale for randomly drawn harmonic terms, mm.
    #[serde(default = "default_amplitude")]
    pub amplitude_mm: f64,
    /// Upper bound for randomly drawn frequencies, cycles per clip.
    #[serde(default = "default_max_frequency")]
    pub max_frequency: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harmonics: Option<Vec<HarmonicTerm>>,
    /// Base 3D pose, one `[x, y, z]` per joint, mm. Defaults to a 17-joint
    /// standing figure (pelvis at the origin, ~1.7 m tall).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rest_pose: Option<Vec<[f64; 3]>>,
}

fn default_amplitude() -> f64 {
    60.0
}

fn default_max_frequency() -> f64 {
    3.0
}

/// Standing rest pose for the 17-joint tree, mm: x lateral, y vertical,
/// z depth (dropped by the orthographic projection).
pub fn default_rest_pose() -> Vec<[f64; 3]> {
    vec![
        [0.0, 0.0, 0.0],       // pelvis
        [-130.0, 0.0, 0.0],    // right hip
        [-130.0, -450.0, 20.0],
        [-140.0, -880.0, 30.0],
        [130.0, 0.0, 0.0],     // left hip
        [130.0, -450.0, 20.0],
        [140.0, -880.0, 30.0],
        [0.0, 230.0, -10.0],   // spine
        [0.0, 460.0, -20.0],   // thorax
        [0.0, 580.0, -10.0],   // neck
        [0.0, 700.0, 0.0],     // head
        [180.0, 440.0, -10.0], // left shoulder
        [210.0, 160.0, 10.0],
        [220.0, -90.0, 30.0],
        [-180.0, 440.0, -10.0], // right shoulder
        [-210.0, 160.0, 10.0],
        [-220.0, -90.0, 30.0],
    ]
}

/// Largest pairwise joint distance of the rest pose; the "skeleton scale"
/// that error thresholds are expressed against.
pub fn skeleton_scale(rest: &[[f64; 3]]) -> f64 {
    let mut best = 0.0f64;
    for a in rest {
        for b in rest {
            let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
            best = best.max(d);
        }
    }
    best
}

pub struct SyntheticDataset<T: Scalar> {
    /// 2D observations with confidence, one per clip.
    pub inputs: Vec<PoseSequence<T>>,
    /// 3D ground truth, one per clip.
    pub targets: Vec<PoseSequence<T>>,
}

impl SyntheticMotionSpec {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading spec {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Generates `(2D input + confidence, 3D ground truth)` clip pairs.
pub fn generate_synthetic<T: Scalar>(spec: &SyntheticMotionSpec) -> Result<SyntheticDataset<T>> {
    ensure!(spec.frames >= 2, "clip length must be at least 2 frames");
    ensure!(spec.clips >= 1, "need at least one clip");
    ensure!(spec.noise_2d >= 0.0, "noise_2d must be non-negative");
    let rest = spec.rest_pose.clone().unwrap_or_else(default_rest_pose);
    let joints = rest.len();
    if let Some(h) = &spec.harmonics {
        ensure!(
            h.len() == joints,
            "harmonics has {} terms for {} joints",
            h.len(),
            joints
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut inputs = Vec::with_capacity(spec.clips);
    let mut targets = Vec::with_capacity(spec.clips);
    for _ in 0..spec.clips {
        let terms: Vec<HarmonicTerm> = match &spec.harmonics {
            Some(h) => h.clone(),
            None => (0..joints)
                .map(|_| HarmonicTerm {
                    amplitude: [
                        rng.random_range(-spec.amplitude_mm..=spec.amplitude_mm),
                        rng.random_range(-spec.amplitude_mm..=spec.amplitude_mm),
                        rng.random_range(-spec.amplitude_mm..=spec.amplitude_mm),
                    ],
                    frequency: rng.random_range(0.5..=spec.max_frequency.max(0.5)),
                    phase: rng.random_range(0.0..std::f64::consts::TAU),
                })
                .collect(),
        };

        let mut gt = Vec::with_capacity(spec.frames * joints * 3);
        for t in 0..spec.frames {
            let u = t as f64 / spec.frames as f64;
            for (j, base) in rest.iter().enumerate() {
                let angle = std::f64::consts::TAU * terms[j].frequency * u + terms[j].phase;
                let s = angle.sin();
                for d in 0..3 {
                    gt.push(T::from_f64(base[d] + terms[j].amplitude[d] * s));
                }
            }
        }
        let target = PoseSequence::new(spec.frames, joints, 3, gt, None)?;

        // orthographic projection plus Gaussian noise; a small fraction of
        // joints can be displaced outright (detector misses). Confidence
        // decays with the actual perturbation magnitude.
        let mut obs = Vec::with_capacity(spec.frames * joints * 2);
        let mut conf = Vec::with_capacity(spec.frames * joints);
        for t in 0..spec.frames {
            for j in 0..joints {
                let p = target.at(t, j);
                let mut dx = 0.0;
                let mut dy = 0.0;
                if spec.noise_2d > 0.0 {
                    dx += gaussian(&mut rng) * spec.noise_2d;
                    dy += gaussian(&mut rng) * spec.noise_2d;
                }
                if spec.outlier_rate > 0.0 && rng.random_bool(spec.outlier_rate) {
                    dx += gaussian(&mut rng) * spec.outlier_mm;
                    dy += gaussian(&mut rng) * spec.outlier_mm;
                }
                if dx == 0.0 && dy == 0.0 {
                    obs.push(p[0]);
                    obs.push(p[1]);
                    conf.push(T::one());
                } else {
                    obs.push(p[0] + T::from_f64(dx));
                    obs.push(p[1] + T::from_f64(dy));
                    let sigma = spec.noise_2d.max(1.0);
                    let c = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
                    conf.push(T::from_f64(c.clamp(0.0, 1.0)));
                }
            }
        }
        inputs.push(PoseSequence::new(spec.frames, joints, 2, obs, Some(conf))?);
        targets.push(target);
    }
    Ok(SyntheticDataset { inputs, targets })
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; two uniforms per call keeps the stream layout simple
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// A rigid clip: the rest pose under a per-frame rotation about the vertical
/// axis plus translation. Bone lengths are exactly preserved.
pub fn rigid_motion_clip<T: Scalar>(frames: usize, seed: u64) -> Result<PoseSequence<T>> {
    ensure!(frames >= 2, "clip length must be at least 2 frames");
    let rest = default_rest_pose();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(frames * rest.len() * 3);
    for t in 0..frames {
        let angle = 0.15 * t as f64 + rng.random_range(-0.01..0.01);
        let (s, c) = angle.sin_cos();
        let shift = [t as f64 * 4.0, (t as f64 * 0.7).sin() * 30.0, t as f64 * -2.0];
        for p in &rest {
            data.push(T::from_f64(c * p[0] + s * p[2] + shift[0]));
            data.push(T::from_f64(p[1] + shift[1]));
            data.push(T::from_f64(-s * p[0] + c * p[2] + shift[2]));
        }
    }
    Ok(PoseSequence::new(frames, rest.len(), 3, data, None)?)
}

/// Topology matching [`default_rest_pose`].
pub fn default_topology() -> SkeletonTopology {
    SkeletonTopology::human36m()
}
