//! Property tests for the line-pose graph and flip augmentation.

use proptest::prelude::*;

use sct_core::lpg::{
    bone_length_variance, horizontal_flip, line_pose, PoseSequence, SkeletonTopology,
};

fn pose_strategy(frames: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1000.0f64..1000.0, frames * 17 * 2)
}

fn pose3_strategy(frames: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1000.0f64..1000.0, frames * 17 * 3)
}

proptest! {
    #[test]
    fn line_pose_is_translation_equivariant(data in pose_strategy(2), tx in -50.0f64..50.0, ty in -50.0f64..50.0) {
        let topo = SkeletonTopology::human36m();
        let pose = PoseSequence::new(2, 17, 2, data.clone(), None).unwrap();
        let shifted_data: Vec<f64> = data
            .chunks(2)
            .flat_map(|p| [p[0] + tx, p[1] + ty])
            .collect();
        let shifted = PoseSequence::new(2, 17, 2, shifted_data, None).unwrap();
        let lp = line_pose(&pose, &topo).unwrap();
        let lp_shifted = line_pose(&shifted, &topo).unwrap();
        for (a, b) in lp.data.chunks(2).zip(lp_shifted.data.chunks(2)) {
            prop_assert!((a[0] + tx - b[0]).abs() < 1e-9);
            prop_assert!((a[1] + ty - b[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn line_pose_is_linear(data in pose_strategy(1), a in -2.0f64..2.0) {
        let topo = SkeletonTopology::human36m();
        let other: Vec<f64> = data.iter().map(|v| v * 0.3 - 7.0).collect();
        let combo: Vec<f64> = data.iter().zip(&other).map(|(x, y)| a * x + y).collect();
        let lp = |d: Vec<f64>| {
            line_pose(&PoseSequence::new(1, 17, 2, d, None).unwrap(), &topo)
                .unwrap()
                .data
        };
        let (la, lb, lc) = (lp(data), lp(other), lp(combo));
        for ((x, y), z) in la.iter().zip(&lb).zip(&lc) {
            prop_assert!((a * x + y - z).abs() < 1e-6);
        }
    }

    #[test]
    fn flip_is_involution_and_preserves_bone_lengths(data in pose3_strategy(2)) {
        let topo = SkeletonTopology::human36m();
        let pose = PoseSequence::new(2, 17, 3, data, None).unwrap();
        let flipped = horizontal_flip(&pose, &topo).unwrap();
        let twice = horizontal_flip(&flipped, &topo).unwrap();
        prop_assert_eq!(&twice, &pose);

        // bone lengths are preserved by the mirror
        for f in 0..2 {
            let lens = |p: &PoseSequence<f64>| -> Vec<f64> {
                (1..17)
                    .map(|j| {
                        let par = topo.parent(j).unwrap();
                        let a = p.at(f, j);
                        let b = p.at(f, par);
                        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2))
                            .sqrt()
                    })
                    .collect()
            };
            let mut orig = lens(&pose);
            let mut flip = lens(&flipped);
            orig.sort_by(f64::total_cmp);
            flip.sort_by(f64::total_cmp);
            for (a, b) in orig.iter().zip(&flip) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn repeated_frame_has_zero_variance(frame in prop::collection::vec(-1000.0f64..1000.0, 17 * 3), reps in 2usize..6) {
        let topo = SkeletonTopology::human36m();
        let mut data = Vec::new();
        for _ in 0..reps {
            data.extend_from_slice(&frame);
        }
        let pose = PoseSequence::new(reps, 17, 3, data, None).unwrap();
        let (per_bone, mean) = bone_length_variance(&pose, &topo).unwrap();
        prop_assert!(per_bone.iter().all(|&v| v == 0.0));
        prop_assert_eq!(mean, 0.0);
    }
}
