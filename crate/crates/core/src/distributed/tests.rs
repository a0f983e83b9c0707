use approx::{assert_abs_diff_eq, assert_relative_eq};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::geometry::{fibonacci_points, random_points, rotate, PointSet};
use crate::kernels::Kernel;
use crate::solver::LocalEstimator;

fn rotation_groups(base_n: usize, seed: u64) -> Vec<LabeledData<f64>> {
    let base = fibonacci_points::<f64>(base_n).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (1..=10)
        .map(|j| {
            let pts = rotate(&base, j).unwrap();
            let outputs: Vec<f64> =
                pts.points().iter().map(|p| p.coords()[2] + rng.random_range(-0.1..0.1)).collect();
            LabeledData::new(pts, outputs).unwrap()
        })
        .collect()
}

fn sorted_outputs(shards: &[LabeledData<f64>]) -> Vec<u64> {
    let mut all: Vec<u64> =
        shards.iter().flat_map(|s| s.outputs().iter().map(|v| v.to_bits())).collect();
    all.sort_unstable();
    all
}

#[test]
fn ten_servers_keep_groups_unchanged() {
    let groups = rotation_groups(30, 1);
    let shards = partition_rotation_groups(&groups, 10, 7).unwrap();
    assert_eq!(shards.len(), 10);
    for (g, s) in groups.iter().zip(&shards) {
        assert_eq!(g, s);
    }
}

#[test]
fn twenty_servers_split_groups_in_half() {
    let groups = rotation_groups(1038, 2);
    let shards = partition_rotation_groups(&groups, 20, 7).unwrap();
    assert_eq!(shards.len(), 20);
    for s in &shards {
        assert_eq!(s.len(), 519);
    }
    assert_eq!(sorted_outputs(&groups), sorted_outputs(&shards));
}

#[test]
fn twenty_five_servers_follow_the_remainder_recipe() {
    // tau = 5: five groups split into ceil(25/10) = 3 shards, five into 2
    let groups = rotation_groups(90, 3);
    let shards = partition_rotation_groups(&groups, 25, 11).unwrap();
    assert_eq!(shards.len(), 25);
    let mut sizes: Vec<usize> = shards.iter().map(LabeledData::len).collect();
    sizes.sort_unstable();
    // 5 groups of 90 into 3 shards of 30; 5 groups into shards of 45
    let expect: Vec<usize> =
        std::iter::repeat_n(30, 15).chain(std::iter::repeat_n(45, 10)).collect();
    assert_eq!(sizes, expect);
    assert_eq!(sorted_outputs(&groups), sorted_outputs(&shards));
}

#[test]
fn partition_is_deterministic_in_the_seed() {
    let groups = rotation_groups(40, 4);
    let a = partition_rotation_groups(&groups, 23, 5).unwrap();
    let b = partition_rotation_groups(&groups, 23, 5).unwrap();
    assert_eq!(a, b);
    let c = partition_rotation_groups(&groups, 23, 6).unwrap();
    assert_ne!(a, c);
}

#[test]
fn partition_error_paths() {
    let groups = rotation_groups(30, 5);
    assert!(matches!(
        partition_rotation_groups(&groups, 9, 0),
        Err(DistributedError::TooFewServers(9))
    ));
    assert!(matches!(
        partition_rotation_groups(&groups[..7], 10, 0),
        Err(DistributedError::BadGroupCount(7))
    ));
    // single-sample groups cannot split in two
    let tiny = rotation_groups(1, 6);
    match partition_rotation_groups(&tiny, 20, 0) {
        Err(DistributedError::GroupTooSmall { size: 1, shards: 2, .. }) => {}
        other => panic!("expected GroupTooSmall, got {other:?}"),
    }
}

#[test]
fn degenerate_partition_splits_evenly() {
    let groups = rotation_groups(30, 7);
    for m in 1..10 {
        let shards = partition_degenerate(&groups, m).unwrap();
        assert_eq!(shards.len(), m);
        let total: usize = shards.iter().map(LabeledData::len).sum();
        assert_eq!(total, 300);
        let max = shards.iter().map(LabeledData::len).max().unwrap();
        let min = shards.iter().map(LabeledData::len).min().unwrap();
        assert!(max - min <= 1, "m={m}: sizes {min}..{max}");
    }
}

fn uniform_shard(data: LabeledData<f64>, server_id: usize, lambda: f64) -> Shard<f64> {
    let rule = QuadratureRule::uniform(data.inputs().clone());
    let cfg = FitConfig::new(lambda, 0, Kernel::gaussian_chordal(2, 0.7).unwrap()).unwrap();
    Shard { server_id, data, rule, cfg }
}

#[test]
fn single_shard_equals_plain_wrls() {
    let pts = fibonacci_points::<f64>(120).unwrap();
    let outputs: Vec<f64> = pts.points().iter().map(|p| (2.0 * p.coords()[2]).cos()).collect();
    let data = LabeledData::new(pts, outputs).unwrap();
    let shard = uniform_shard(data.clone(), 0, 1e-4);
    let local = wrls_fit(&shard.data, &shard.rule, &shard.cfg).unwrap();
    let global = dwrls_fit(&[shard], false).unwrap();
    assert_eq!(global.total_samples(), 120);
    let test = random_points::<f64>(100, 9).unwrap();
    for x in test.points() {
        let g = global.evaluate(x).unwrap();
        let l = local.evaluate(x).unwrap();
        assert_abs_diff_eq!(g, l, epsilon = 1e-12);
    }
}

#[test]
fn identical_shards_reproduce_the_common_function() {
    let pts = fibonacci_points::<f64>(60).unwrap();
    let outputs: Vec<f64> = pts.points().iter().map(|p| p.coords()[0] * p.coords()[2]).collect();
    let data = LabeledData::new(pts, outputs).unwrap();
    let s0 = uniform_shard(data.clone(), 0, 1e-3);
    let s1 = uniform_shard(data.clone(), 1, 1e-3);
    let local = wrls_fit(&s0.data, &s0.rule, &s0.cfg).unwrap();
    let global = dwrls_fit(&[s0, s1], false).unwrap();
    let test = random_points::<f64>(50, 10).unwrap();
    for x in test.points() {
        assert_abs_diff_eq!(
            global.evaluate(x).unwrap(),
            local.evaluate(x).unwrap(),
            epsilon = 1e-12
        );
    }
}

#[test]
fn aggregation_is_permutation_invariant() {
    let groups = rotation_groups(40, 11);
    let shards: Vec<Shard<f64>> = partition_rotation_groups(&groups, 10, 3)
        .unwrap()
        .into_iter()
        .enumerate()
        .map(|(i, d)| uniform_shard(d, i, 1e-3))
        .collect();
    let mut reversed: Vec<Shard<f64>> = shards.clone();
    reversed.reverse();
    let a = dwrls_fit(&shards, false).unwrap();
    let b = dwrls_fit(&reversed, false).unwrap();
    let test = random_points::<f64>(64, 12).unwrap();
    let va = a.evaluate_batch(test.points()).unwrap();
    let vb = b.evaluate_batch(test.points()).unwrap();
    for (x, y) in va.iter().zip(&vb) {
        assert_abs_diff_eq!(x, y, epsilon = 1e-12);
    }
}

#[test]
fn aggregation_weights_are_sample_fractions() {
    let groups = rotation_groups(33, 13);
    let shards: Vec<Shard<f64>> = partition_rotation_groups(&groups, 13, 1)
        .unwrap()
        .into_iter()
        .enumerate()
        .map(|(i, d)| uniform_shard(d, i, 1e-2))
        .collect();
    let global = dwrls_fit(&shards, false).unwrap();
    let total: usize = global.total_samples();
    assert_eq!(total, 330);
    let sum: f64 = global.components().iter().map(|(w, _)| w).sum();
    assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
    for (w, est) in global.components() {
        assert_abs_diff_eq!(*w, est.sample_count() as f64 / total as f64, epsilon = 1e-12);
    }
}

#[test]
fn shard_failures_are_fail_fast_with_ids() {
    let pts = fibonacci_points::<f64>(20).unwrap();
    let outputs = vec![0.25; 20];
    let good = LabeledData::new(pts.clone(), outputs.clone()).unwrap();
    let mut bad_shard = uniform_shard(good.clone(), 7, 1e-3);
    // rule on different nodes: the fit must reject it
    bad_shard.rule = QuadratureRule::uniform(fibonacci_points::<f64>(20).unwrap().subset(
        &(0..20).rev().collect::<Vec<_>>(),
    ));
    let shards = vec![uniform_shard(good.clone(), 3, 1e-3), bad_shard];
    match dwrls_fit(&shards, false) {
        Err(DistributedError::ShardFailures(ids)) => assert_eq!(ids, vec![7]),
        other => panic!("expected ShardFailures, got {other:?}"),
    }
    // partial aggregation renormalizes over survivors
    let global = dwrls_fit(&shards, true).unwrap();
    assert_eq!(global.components().len(), 1);
    assert_abs_diff_eq!(global.components()[0].0, 1.0, epsilon = 1e-15);
}

#[test]
fn theoretical_config_matches_schedule() {
    let groups = rotation_groups(1038, 17);
    let shard_data = partition_rotation_groups(&groups, 10, 5).unwrap();
    let shards = per_shard_config(shard_data, 2, &ConfigRule::Theoretical { gamma: 2.0 }).unwrap();
    assert_eq!(shards.len(), 10);
    let lambda_expect = 10_380f64.powf(-2.0 / 3.0);
    for shard in &shards {
        assert_relative_eq!(shard.cfg.lambda, lambda_expect, max_relative = 1e-12);
        assert_eq!(shard.cfg.quad_degree, 22);
        assert_eq!(shard.rule.degree(), 22);
        assert!(shard.rule.residual() < 1e-8);
    }
}

#[test]
fn theoretical_config_rejects_undersized_shards() {
    let groups = rotation_groups(30, 19);
    let shard_data = partition_rotation_groups(&groups, 10, 5).unwrap();
    match per_shard_config(shard_data, 2, &ConfigRule::Theoretical { gamma: 2.0 }) {
        Err(DistributedError::DegreeExceedsCapacity { required, ceiling, samples: 30, .. }) => {
            assert!(required > ceiling);
        }
        other => panic!("expected DegreeExceedsCapacity, got {other:?}"),
    }
}

#[test]
fn cv_config_rescales_toward_total_size() {
    let groups = rotation_groups(60, 23);
    let shard_data = partition_rotation_groups(&groups, 10, 5).unwrap();
    let rule = ConfigRule::CvRescaled {
        kernel_grid: vec![Kernel::gaussian_chordal(2, 0.7).unwrap()],
        lambda_grid: vec![0.5, 0.25, 0.125],
        cv_train_cap: 40,
        cv_holdout_cap: 20,
        seed: 3,
        advisory_gamma: None,
    };
    let shards = per_shard_config(shard_data, 2, &rule).unwrap();
    for shard in &shards {
        // rescaling from n_cv = 40 to n_total = 600 drives lambda well below
        // the raw grid values
        assert!(shard.cfg.lambda < 0.125, "lambda {}", shard.cfg.lambda);
    }
    // lambda = 1 is a fixed point of the cv path, not an error
    let groups = rotation_groups(60, 29);
    let shard_data = partition_rotation_groups(&groups, 10, 5).unwrap();
    let rule = ConfigRule::CvRescaled {
        kernel_grid: vec![Kernel::gaussian_chordal(2, 0.7).unwrap()],
        lambda_grid: vec![1.0],
        cv_train_cap: 40,
        cv_holdout_cap: 20,
        seed: 3,
        advisory_gamma: None,
    };
    let shards = per_shard_config(shard_data, 2, &rule).unwrap();
    assert_eq!(shards[0].cfg.lambda, 1.0);
}

#[test]
fn server_bound_arithmetic() {
    // n = 10380, gamma = 2, d = 2: bound = n^{1/3} ~ 21.8, so 22 servers warn
    let bound = server_count_bound(10_380, 2.0, 2);
    assert_relative_eq!(bound, 21.813_856_465_808_134, max_relative = 1e-12);
    assert!(21.0 < bound && bound < 22.0);
}

#[test]
fn coordinator_is_structurally_blind_to_training_data() {
    // architectural check: the aggregation module must not reference the
    // labeled-data side of the crate at all
    let source = include_str!("aggregate.rs");
    for forbidden in ["LabeledData", "QuadratureRule", ".outputs()", "NoiseModel"] {
        assert!(
            !source.contains(forbidden),
            "aggregation module mentions '{forbidden}'"
        );
    }
    assert!(source.contains("EstimatorMessage"));
}

#[test]
fn global_estimator_json_roundtrip() {
    let pts = fibonacci_points::<f64>(25).unwrap();
    let outputs: Vec<f64> = pts.points().iter().map(|p| p.coords()[1]).collect();
    let data = LabeledData::new(pts, outputs).unwrap();
    let shards =
        vec![uniform_shard(data.clone(), 0, 1e-3), uniform_shard(data.clone(), 1, 1e-2)];
    let global = dwrls_fit(&shards, false).unwrap();
    let json = global.to_json();
    let back = GlobalEstimator::<f64>::from_json(&json).unwrap();
    assert_eq!(back.total_samples(), global.total_samples());
    let x = crate::geometry::SpherePoint::new(vec![0.1, -0.7, 0.7]).unwrap();
    assert_relative_eq!(
        back.evaluate(&x).unwrap(),
        global.evaluate(&x).unwrap(),
        epsilon = 1e-12
    );
}

#[test]
fn message_carries_only_the_estimator_payload() {
    // compile-time shape of the privacy boundary: constructing a message
    // requires exactly these three fields
    let pts = PointSet::new(
        vec![crate::geometry::SpherePoint::new(vec![0.0, 0.0, 1.0]).unwrap()],
        None,
    )
    .unwrap();
    let est = LocalEstimator::new(pts, vec![1.0], Kernel::wendland(2).unwrap(), 1);
    let msg = EstimatorMessage { server_id: 0, sample_count: est.sample_count(), estimator: est };
    let global = aggregate_messages(vec![msg]);
    assert_eq!(global.total_samples(), 1);
}
