mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;

use common::*;
use stitchnorm::geometry::{angle_error_unoriented, PointCloud, SamplingPlan};
use stitchnorm::io::synthetic::plane;
use stitchnorm::stitching::{
    naive_stitch, run_pipeline, stitch, JetEstimator, PcaEstimator, PipelineConfig,
    SparseIndexMatrix, StitchConfig,
};
use stitchnorm::Vec3;

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn sparse_matches_naive(n in 1usize..150, m in 1usize..12, k in 1usize..40, seed in any::<u64>()) {
        let (m, k) = (m.min(n), k.min(n));
        let (cloud, patches, preds) = random_instance(&mut rng(seed), n, m, k);
        let cfg = StitchConfig::default();
        let index = SparseIndexMatrix::build(&patches, n).unwrap();
        let fast = stitch(&cloud, &patches, &preds, &index, &cfg, None).unwrap();
        let slow = naive_stitch(&cloud, &patches, &preds, &cfg, None).unwrap();
        prop_assert_eq!(&fast.winner_patch, &slow.winner_patch);
        prop_assert_eq!(&fast.normals, &slow.normals);
        prop_assert_eq!(&fast.uncovered, &slow.uncovered);
        prop_assert_eq!(fast.candidate_count.iter().sum::<usize>(), k * m);
    }

    #[test]
    fn winners_follow_point_permutations(n in 2usize..120, seed in any::<u64>()) {
        let mut r = rng(seed);
        let (cloud, patches, preds) = random_instance(&mut r, n, 5.min(n), 20.min(n));
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut r);
        // new id perm[i] holds old point i
        let mut positions = vec![Vec3::zeros(); n];
        for (old, &new) in perm.iter().enumerate() {
            positions[new] = cloud.position(old);
        }
        let moved = PointCloud::new(positions).unwrap();
        let mut moved_patches = patches.clone();
        for p in &mut moved_patches {
            p.center_id = perm[p.center_id];
            p.member_ids.iter_mut().for_each(|id| *id = perm[*id]);
        }
        let cfg = StitchConfig::default();
        let a = stitch(&cloud, &patches, &preds, &SparseIndexMatrix::build(&patches, n).unwrap(), &cfg, None).unwrap();
        let b = stitch(&moved, &moved_patches, &preds, &SparseIndexMatrix::build(&moved_patches, n).unwrap(), &cfg, None).unwrap();
        for old in 0..n {
            prop_assert_eq!(a.winner_patch[old], b.winner_patch[perm[old]]);
            prop_assert_eq!(a.normals[old], b.normals[perm[old]]);
        }
    }
}

#[test]
fn plane_pipeline_is_exact() {
    let cloud = plane(3000, 1).unwrap();
    for estimator in [&PcaEstimator as &dyn stitchnorm::stitching::PatchEstimator, &JetEstimator] {
        let plan = SamplingPlan::new(64, 400, 0);
        let run = run_pipeline(&cloud, &plan, estimator, &PipelineConfig::default()).unwrap();
        for n in &run.result.normals {
            assert!(angle_error_unoriented(n, &Vec3::z()).unwrap() < 1e-5);
        }
        assert!((run.overlap - 64.0 * 400.0 / 3000.0).abs() < 1e-12);
    }
}

#[test]
fn uncovered_points_fall_back_to_local_planes() {
    let cloud = plane(2000, 2).unwrap();
    let plan = SamplingPlan::new(16, 3, 0);
    let run = run_pipeline(&cloud, &plan, &PcaEstimator, &PipelineConfig::default()).unwrap();
    assert!(run.result.uncovered.len() >= 2000 - 48);
    for &i in &run.result.uncovered {
        assert_eq!(run.result.winner_patch[i], None);
        assert_eq!(run.result.candidate_count[i], 0);
        assert!(angle_error_unoriented(&run.result.normals[i], &Vec3::z()).unwrap() < 1e-5);
    }
}

#[test]
fn naive_flag_gives_identical_output() {
    let cloud = plane(1500, 3).unwrap();
    let plan = SamplingPlan::new(50, 200, 4);
    let sparse = run_pipeline(&cloud, &plan, &JetEstimator, &PipelineConfig::default()).unwrap();
    let naive_cfg = PipelineConfig {
        naive_stitch: true,
        ..PipelineConfig::default()
    };
    let naive = run_pipeline(&cloud, &plan, &JetEstimator, &naive_cfg).unwrap();
    assert_eq!(sparse.result.normals, naive.result.normals);
    assert_eq!(sparse.result.winner_patch, naive.result.winner_patch);
}
