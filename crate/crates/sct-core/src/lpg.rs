//! Line Pose Graph input augmentation and pose-sequence plumbing.
//!
//! A 2D pose is a tree of joints; its line graph has one vertex per bone.
//! Each bone vertex is placed at the midpoint of its two joints, and the set
//! {root joint, bones} forms a second 17-point "pose" that is concatenated
//! with the raw joint channels before embedding.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Parent-index tree over the joints, plus the left/right pairing used by
/// flip augmentation. The root is joint 0 with parent -1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkeletonTopology {
    parents: Vec<i32>,
    left_right_pairs: Vec<(usize, usize)>,
    names: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct TopologyJson {
    parents: Vec<i32>,
    pairs: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    names: Option<Vec<String>>,
}

impl SkeletonTopology {
    pub fn new(parents: Vec<i32>, left_right_pairs: Vec<(usize, usize)>) -> Result<Self> {
        let j = parents.len();
        crate::contract!(j >= 1, "topology needs at least one joint");
        crate::contract!(
            parents[0] == -1,
            "joint 0 must be the root (parent -1), got {}",
            parents[0]
        );
        for (i, &p) in parents.iter().enumerate().skip(1) {
            crate::contract!(
                p >= 0 && (p as usize) < j && p as usize != i,
                "joint {i} has invalid parent {p}"
            );
            // acyclicity: walking up must reach the root within J steps
            let mut cur = i;
            let mut steps = 0;
            while parents[cur] != -1 {
                cur = parents[cur] as usize;
                steps += 1;
                crate::contract!(steps <= j, "parent chain of joint {i} contains a cycle");
            }
        }
        for &(l, r) in &left_right_pairs {
            crate::contract!(
                l < j && r < j && l != r,
                "left/right pair ({l}, {r}) invalid for {j} joints"
            );
        }
        Ok(SkeletonTopology {
            parents,
            left_right_pairs,
            names: None,
        })
    }

    /// The standard 17-joint Human3.6M tree: pelvis root, right leg 1-2-3,
    /// left leg 4-5-6, spine/thorax/neck/head 7-10, left arm 11-13, right
    /// arm 14-16.
    pub fn human36m() -> Self {
        SkeletonTopology::new(
            vec![-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15],
            vec![(4, 1), (5, 2), (6, 3), (11, 14), (12, 15), (13, 16)],
        )
        .expect("built-in topology is valid")
    }

    pub fn joint_count(&self) -> usize {
        self.parents.len()
    }

    pub fn bone_count(&self) -> usize {
        self.parents.len() - 1
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        let p = self.parents[joint];
        (p >= 0).then_some(p as usize)
    }

    pub fn parents(&self) -> &[i32] {
        &self.parents
    }

    pub fn left_right_pairs(&self) -> &[(usize, usize)] {
        &self.left_right_pairs
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json: TopologyJson = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        let mut topo = SkeletonTopology::new(json.parents, json.pairs)?;
        topo.names = json.names;
        Ok(topo)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = TopologyJson {
            parents: self.parents.clone(),
            pairs: self.left_right_pairs.clone(),
            names: self.names.clone(),
        };
        let mut f = File::create(path)?;
        serde_json::to_writer(&mut f, &json)?;
        writeln!(f)?;
        Ok(())
    }
}

/// F frames x J joints of 2D (plus optional per-joint confidence) or 3D
/// coordinates, stored row-major as `[F, J, dims]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence<T: Scalar> {
    pub frames: usize,
    pub joints: usize,
    pub dims: usize,
    pub data: Vec<T>,
    pub confidence: Option<Vec<T>>,
}

#[derive(Serialize, Deserialize)]
struct PoseClipJson {
    fps: f64,
    joints: usize,
    frames: Vec<Vec<Vec<f64>>>,
}

impl<T: Scalar> PoseSequence<T> {
    pub fn new(
        frames: usize,
        joints: usize,
        dims: usize,
        data: Vec<T>,
        confidence: Option<Vec<T>>,
    ) -> Result<Self> {
        crate::contract!(frames >= 1, "pose sequence needs at least one frame");
        crate::contract!(dims == 2 || dims == 3, "pose dims must be 2 or 3, got {dims}");
        crate::contract!(
            data.len() == frames * joints * dims,
            "pose data length {} does not match {frames}x{joints}x{dims}",
            data.len()
        );
        crate::contract!(
            data.iter().all(|v| v.is_finite()),
            "pose data contains a non-finite value"
        );
        if let Some(c) = &confidence {
            crate::contract!(
                c.len() == frames * joints,
                "confidence length {} does not match {frames}x{joints}",
                c.len()
            );
            crate::contract!(
                c.iter().all(|v| *v >= T::zero() && *v <= T::one()),
                "confidence values must lie in [0, 1]"
            );
        }
        Ok(PoseSequence {
            frames,
            joints,
            dims,
            data,
            confidence,
        })
    }

    #[inline]
    pub fn at(&self, frame: usize, joint: usize) -> &[T] {
        let base = (frame * self.joints + joint) * self.dims;
        &self.data[base..base + self.dims]
    }

    /// Serializes as one JSON line. 2D clips with confidence write
    /// `[x, y, conf]` triples; 3D clips write `[x, y, z]`.
    pub fn to_json_line(&self, fps: f64) -> String {
        let frames: Vec<Vec<Vec<f64>>> = (0..self.frames)
            .map(|f| {
                (0..self.joints)
                    .map(|j| {
                        let mut v: Vec<f64> =
                            self.at(f, j).iter().map(|x| x.as_f64()).collect();
                        if self.dims == 2 {
                            if let Some(c) = &self.confidence {
                                v.push(c[f * self.joints + j].as_f64());
                            }
                        }
                        v
                    })
                    .collect()
            })
            .collect();
        serde_json::to_string(&PoseClipJson {
            fps,
            joints: self.joints,
            frames,
        })
        .expect("pose serialization cannot fail")
    }

    /// Parses one JSON line. `expect_dims == 2` reads `[x, y]` or
    /// `[x, y, conf]`; `expect_dims == 3` reads `[x, y, z]`.
    pub fn from_json_line(line: &str, expect_dims: usize) -> Result<Self> {
        let clip: PoseClipJson = serde_json::from_str(line)?;
        let frames = clip.frames.len();
        crate::contract!(frames >= 1, "clip has no frames");
        let joints = clip.joints;
        let mut data = Vec::with_capacity(frames * joints * expect_dims);
        let mut conf: Option<Vec<T>> = None;
        for (fi, frame) in clip.frames.iter().enumerate() {
            crate::contract!(
                frame.len() == joints,
                "frame {fi} has {} joints, header says {joints}",
                frame.len()
            );
            for joint in frame {
                match (expect_dims, joint.len()) {
                    (2, 2) => {
                        data.extend(joint.iter().map(|&v| T::from_f64(v)));
                    }
                    (2, 3) => {
                        data.push(T::from_f64(joint[0]));
                        data.push(T::from_f64(joint[1]));
                        conf.get_or_insert_with(Vec::new).push(T::from_f64(joint[2]));
                    }
                    (3, 3) => {
                        data.extend(joint.iter().map(|&v| T::from_f64(v)));
                    }
                    (want, got) => {
                        return Err(Error::Contract(format!(
                            "joint entry has {got} values, expected {want} coordinates"
                        )))
                    }
                }
            }
        }
        if let Some(c) = &conf {
            crate::contract!(
                c.len() == frames * joints,
                "confidence present on some joints but not all"
            );
        }
        PoseSequence::new(frames, joints, expect_dims, data, conf)
    }
}

/// Writes clips as JSON-lines.
pub fn write_pose_file<T: Scalar>(
    path: &Path,
    clips: &[PoseSequence<T>],
    fps: f64,
) -> Result<()> {
    let mut f = File::create(path)?;
    for clip in clips {
        writeln!(f, "{}", clip.to_json_line(fps))?;
    }
    Ok(())
}

/// Reads a JSON-lines pose file where every clip has `expect_dims` dims.
pub fn read_pose_file<T: Scalar>(path: &Path, expect_dims: usize) -> Result<Vec<PoseSequence<T>>> {
    let mut clips = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        clips.push(PoseSequence::from_json_line(&line, expect_dims)?);
    }
    Ok(clips)
}

/// Line-pose construction: slot 0 is the root joint itself, slot `j`
/// (`j >= 1`) is the midpoint of joint `j` and its parent. Works for 2D
/// or 3D coordinates.
pub fn line_pose<T: Scalar>(
    pose: &PoseSequence<T>,
    topo: &SkeletonTopology,
) -> Result<PoseSequence<T>> {
    crate::contract!(
        pose.joints == topo.joint_count(),
        "pose has {} joints but topology has {}",
        pose.joints,
        topo.joint_count()
    );
    let (frames, joints, dims) = (pose.frames, pose.joints, pose.dims);
    let mut data = vec![T::zero(); frames * joints * dims];
    let half = T::from_f64(0.5);
    for f in 0..frames {
        let root = pose.at(f, 0);
        data[(f * joints) * dims..(f * joints) * dims + dims].copy_from_slice(root);
        for j in 1..joints {
            let p = topo.parent(j).expect("non-root joint has a parent");
            let a = pose.at(f, j);
            let b = pose.at(f, p);
            let base = (f * joints + j) * dims;
            for d in 0..dims {
                data[base + d] = (a[d] + b[d]) * half;
            }
        }
    }
    PoseSequence::new(frames, joints, dims, data, None)
}

/// Builds the network input: per joint the channels
/// `(x, y, confidence, bone_x, bone_y)` as a `[F, J, 5]` tensor.
/// Confidence defaults to 1 when the sequence carries none.
pub fn augment_sequence<T: Scalar>(
    pose: &PoseSequence<T>,
    topo: &SkeletonTopology,
) -> Result<Tensor<T>> {
    crate::contract!(pose.dims == 2, "augment_sequence expects 2D input poses");
    let bones = line_pose(pose, topo)?;
    let (frames, joints) = (pose.frames, pose.joints);
    let mut data = Vec::with_capacity(frames * joints * 5);
    for f in 0..frames {
        for j in 0..joints {
            let xy = pose.at(f, j);
            let b = bones.at(f, j);
            data.push(xy[0]);
            data.push(xy[1]);
            data.push(match &pose.confidence {
                Some(c) => c[f * joints + j],
                None => T::one(),
            });
            data.push(b[0]);
            data.push(b[1]);
        }
    }
    Tensor::from_vec(data, &[frames, joints, 5], false)
}

/// Input channels without the line-pose augmentation: `(x, y, confidence)`
/// as a `[F, J, 3]` tensor. The LPG-ablation path.
pub fn plain_channels<T: Scalar>(pose: &PoseSequence<T>) -> Result<Tensor<T>> {
    crate::contract!(pose.dims == 2, "plain_channels expects 2D input poses");
    let (frames, joints) = (pose.frames, pose.joints);
    let mut data = Vec::with_capacity(frames * joints * 3);
    for f in 0..frames {
        for j in 0..joints {
            let xy = pose.at(f, j);
            data.push(xy[0]);
            data.push(xy[1]);
            data.push(match &pose.confidence {
                Some(c) => c[f * joints + j],
                None => T::one(),
            });
        }
    }
    Tensor::from_vec(data, &[frames, joints, 3], false)
}

/// Mirror augmentation: negates every x coordinate, then swaps each
/// left/right joint pair (coordinates and confidence). An involution.
pub fn horizontal_flip<T: Scalar>(
    pose: &PoseSequence<T>,
    topo: &SkeletonTopology,
) -> Result<PoseSequence<T>> {
    crate::contract!(
        pose.joints == topo.joint_count(),
        "pose has {} joints but topology has {}",
        pose.joints,
        topo.joint_count()
    );
    crate::contract!(
        !topo.left_right_pairs().is_empty(),
        "topology provides no left/right pairs for flipping"
    );
    let (frames, joints, dims) = (pose.frames, pose.joints, pose.dims);
    let mut data = pose.data.clone();
    let mut confidence = pose.confidence.clone();
    for f in 0..frames {
        for j in 0..joints {
            data[(f * joints + j) * dims] = -data[(f * joints + j) * dims];
        }
        for &(l, r) in topo.left_right_pairs() {
            for d in 0..dims {
                data.swap((f * joints + l) * dims + d, (f * joints + r) * dims + d);
            }
            if let Some(c) = confidence.as_mut() {
                c.swap(f * joints + l, f * joints + r);
            }
        }
    }
    PoseSequence::new(frames, joints, dims, data, confidence)
}

/// Per-bone population variance (over frames) of the bone length, plus the
/// mean over bones. The stability diagnostic for predicted sequences.
pub fn bone_length_variance<T: Scalar>(
    pose3d: &PoseSequence<T>,
    topo: &SkeletonTopology,
) -> Result<(Vec<f64>, f64)> {
    crate::contract!(
        pose3d.frames >= 2,
        "bone length variance needs at least two frames, got {}",
        pose3d.frames
    );
    crate::contract!(
        pose3d.joints == topo.joint_count(),
        "pose has {} joints but topology has {}",
        pose3d.joints,
        topo.joint_count()
    );
    let frames = pose3d.frames;
    let mut variances = Vec::with_capacity(topo.bone_count());
    for j in 1..pose3d.joints {
        let p = topo.parent(j).expect("non-root joint has a parent");
        let lengths: Vec<f64> = (0..frames)
            .map(|f| {
                let a = pose3d.at(f, j);
                let b = pose3d.at(f, p);
                a.iter()
                    .zip(b)
                    .map(|(x, y)| {
                        let d = x.as_f64() - y.as_f64();
                        d * d
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        // shift by the first length so a constant series is exactly zero
        let base = lengths[0];
        let mean_shift = lengths.iter().map(|l| l - base).sum::<f64>() / frames as f64;
        let var = lengths
            .iter()
            .map(|l| {
                let d = (l - base) - mean_shift;
                d * d
            })
            .sum::<f64>()
            / frames as f64;
        variances.push(var);
    }
    let mean_var = variances.iter().sum::<f64>() / variances.len() as f64;
    Ok((variances, mean_var))
}
