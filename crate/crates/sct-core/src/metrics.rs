//! Evaluation metrics: MPJPE, Procrustes-aligned MPJPE, PCK@150mm and AUC.
//! All distances are in millimeters; computation runs in f64.

use nalgebra::Matrix3;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const PCK_THRESHOLD_MM: f64 = 150.0;
/// AUC thresholds: 0, 5, ..., 150 mm.
const AUC_STEPS: usize = 31;

/// Metric summary over a batch of frames.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    /// Mean per-joint position error, mm.
    pub mpjpe: f64,
    /// MPJPE after per-frame similarity (Procrustes) alignment, mm.
    pub p_mpjpe: f64,
    /// Percentage of joints with error strictly below 150 mm.
    pub pck: f64,
    /// Mean PCK over thresholds 0, 5, ..., 150 mm, as a fraction.
    pub auc: f64,
    /// Frames where alignment fell back to translation only (all joints
    /// coincident on one side).
    pub degenerate_frames: usize,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("metrics serialize")
    }
}

fn frame_view(data: &[f64], joints: usize, frame: usize) -> Vec<[f64; 3]> {
    (0..joints)
        .map(|j| {
            let base = (frame * joints + j) * 3;
            [data[base], data[base + 1], data[base + 2]]
        })
        .collect()
}

fn centroid(pts: &[[f64; 3]]) -> [f64; 3] {
    let n = pts.len() as f64;
    let mut c = [0.0; 3];
    for p in pts {
        for d in 0..3 {
            c[d] += p[d];
        }
    }
    for d in c.iter_mut() {
        *d /= n;
    }
    c
}

/// Optimal similarity alignment (scale, rotation, translation) of `pred`
/// onto `gt` in the least-squares sense, with the standard reflection
/// correction. Returns the aligned points and whether the frame was
/// degenerate (translation-only fallback).
fn procrustes_align(pred: &[[f64; 3]], gt: &[[f64; 3]]) -> (Vec<[f64; 3]>, bool) {
    let mu_p = centroid(pred);
    let mu_g = centroid(gt);
    let centered_p: Vec<[f64; 3]> = pred
        .iter()
        .map(|p| [p[0] - mu_p[0], p[1] - mu_p[1], p[2] - mu_p[2]])
        .collect();
    let centered_g: Vec<[f64; 3]> = gt
        .iter()
        .map(|p| [p[0] - mu_g[0], p[1] - mu_g[1], p[2] - mu_g[2]])
        .collect();
    let norm_p_sq: f64 = centered_p.iter().flatten().map(|v| v * v).sum();
    let norm_g_sq: f64 = centered_g.iter().flatten().map(|v| v * v).sum();
    if norm_p_sq == 0.0 || norm_g_sq == 0.0 {
        // no shape on one side: best similarity is translating centroids
        let aligned = pred
            .iter()
            .map(|p| {
                [
                    p[0] - mu_p[0] + mu_g[0],
                    p[1] - mu_p[1] + mu_g[1],
                    p[2] - mu_p[2] + mu_g[2],
                ]
            })
            .collect();
        return (aligned, true);
    }

    // covariance H = P_c^T G_c, row-vector convention
    let mut h = Matrix3::<f64>::zeros();
    for (p, g) in centered_p.iter().zip(&centered_g) {
        for a in 0..3 {
            for b in 0..3 {
                h[(a, b)] += p[a] * g[b];
            }
        }
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("svd with u");
    let v_t = svd.v_t.expect("svd with v_t");
    let mut d = Matrix3::<f64>::identity();
    // proper rotation: flip the smallest singular direction if needed
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let rot = u * d * v_t;
    let trace = svd.singular_values[0] + svd.singular_values[1]
        + d[(2, 2)] * svd.singular_values[2];
    let scale = trace / norm_p_sq;

    let aligned = centered_p
        .iter()
        .map(|p| {
            let mut out = [0.0; 3];
            for b in 0..3 {
                let mut s = 0.0;
                for a in 0..3 {
                    s += p[a] * rot[(a, b)];
                }
                out[b] = scale * s + mu_g[b];
            }
            out
        })
        .collect();
    (aligned, false)
}

fn joint_errors(a: &[[f64; 3]], b: &[[f64; 3]]) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(p, g)| {
            ((p[0] - g[0]).powi(2) + (p[1] - g[1]).powi(2) + (p[2] - g[2]).powi(2)).sqrt()
        })
        .collect()
}

/// Computes all protocol metrics over `[B, F, J, 3]` (or `[F, J, 3]`)
/// predictions and ground truth in millimeters.
pub fn evaluate_metrics<T: Scalar>(pred: &Tensor<T>, gt: &Tensor<T>) -> Result<MetricsReport> {
    if pred.shape() != gt.shape() {
        return Err(Error::ShapeMismatch {
            op: "evaluate_metrics",
            lhs: pred.shape().to_vec(),
            rhs: gt.shape().to_vec(),
        });
    }
    let s = pred.shape();
    crate::contract!(
        (s.len() == 3 || s.len() == 4) && *s.last().unwrap() == 3,
        "evaluate_metrics expects [B, F, J, 3] or [F, J, 3], got {:?}",
        s
    );
    let joints = s[s.len() - 2];
    let frames_total = pred.numel() / (joints * 3);
    crate::contract!(frames_total >= 1 && joints >= 1, "empty metric input");

    let pd: Vec<f64> = pred.data().iter().map(|v| v.as_f64()).collect();
    let gd: Vec<f64> = gt.data().iter().map(|v| v.as_f64()).collect();

    let mut sum_err = 0.0;
    let mut sum_aligned_err = 0.0;
    let mut degenerate_frames = 0usize;
    let mut threshold_hits = vec![0usize; AUC_STEPS];
    let mut pck_hits = 0usize;
    let joint_count = frames_total * joints;

    for f in 0..frames_total {
        let p = frame_view(&pd, joints, f);
        let g = frame_view(&gd, joints, f);
        let errs = joint_errors(&p, &g);
        sum_err += errs.iter().sum::<f64>();

        let (aligned, degenerate) = procrustes_align(&p, &g);
        if degenerate {
            degenerate_frames += 1;
        }
        sum_aligned_err += joint_errors(&aligned, &g).iter().sum::<f64>();

        for e in &errs {
            if *e < PCK_THRESHOLD_MM {
                pck_hits += 1;
            }
            for (i, hits) in threshold_hits.iter_mut().enumerate() {
                if *e < 5.0 * i as f64 {
                    *hits += 1;
                }
            }
        }
    }

    let auc = threshold_hits
        .iter()
        .map(|&h| h as f64 / joint_count as f64)
        .sum::<f64>()
        / AUC_STEPS as f64;

    Ok(MetricsReport {
        mpjpe: sum_err / joint_count as f64,
        p_mpjpe: sum_aligned_err / joint_count as f64,
        pck: 100.0 * pck_hits as f64 / joint_count as f64,
        auc,
        degenerate_frames,
    })
}
