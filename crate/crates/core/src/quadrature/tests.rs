use std::f64::consts::PI;

use approx::{assert_abs_diff_eq, assert_relative_eq};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::geometry::{fibonacci_points, PointSet, SpherePoint};
use crate::harmonics::{BandLimited, HarmonicIndex};

fn icosahedron() -> PointSet<f64> {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut pts = Vec::new();
    for &s1 in &[1.0, -1.0] {
        for &s2 in &[1.0, -1.0] {
            pts.push(SpherePoint::new(vec![0.0, s1, s2 * phi]).unwrap());
            pts.push(SpherePoint::new(vec![s1, s2 * phi, 0.0]).unwrap());
            pts.push(SpherePoint::new(vec![s1 * phi, 0.0, s2]).unwrap());
        }
    }
    PointSet::new(pts, Some("icosahedron".into())).unwrap()
}

fn random_bandlimited(max_degree: usize, seed: u64) -> BandLimited<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = BandLimited::new(2, max_degree);
    for k in 0..=max_degree {
        for l in 1..=2 * k + 1 {
            p.set(HarmonicIndex::new(k, l, 2).unwrap(), rng.random_range(-1.0..1.0)).unwrap();
        }
    }
    p
}

#[test]
fn uniform_rule_integrates_constants() {
    let rule = QuadratureRule::uniform(fibonacci_points::<f64>(77).unwrap());
    let total: f64 = rule.weights().iter().sum();
    assert_relative_eq!(total, 4.0 * PI, epsilon = 1e-12);
    assert_eq!(rule.degree(), 0);
    assert_relative_eq!(rule.c1_observed(), 1.0, epsilon = 1e-12);
    assert!(verify_exactness(&rule, 0).unwrap() < 1e-12);
}

#[test]
fn degree_zero_construction_recovers_total_mass() {
    let pts = fibonacci_points::<f64>(20).unwrap();
    let rule = build_quadrature(&pts, 0).unwrap();
    let total: f64 = rule.weights().iter().sum();
    assert_abs_diff_eq!(total, 4.0 * PI, epsilon = 1e-8);
    assert!(rule.residual() < 1e-8);
    assert!(rule.weights().iter().all(|&w| w >= 0.0));
}

#[test]
fn icosahedron_is_a_five_design_and_weights_are_recovered() {
    let ico = icosahedron();
    // equal weights are already exact to degree 5
    let equal = QuadratureRule::uniform(ico.clone());
    assert!(verify_exactness(&equal, 5).unwrap() < 1e-12);
    // construction at the design degree recovers the equal weights
    let rule = build_quadrature(&ico, 5).unwrap();
    let expect = 4.0 * PI / 12.0;
    for &w in rule.weights() {
        assert!((w - expect).abs() / expect < 0.01, "weight {w} vs {expect}");
    }
    assert!(verify_exactness(&rule, 5).unwrap() < 1e-8);
}

#[test]
fn fibonacci_rule_at_degree_twelve() {
    let pts = fibonacci_points::<f64>(400).unwrap();
    let rule = build_quadrature(&pts, 12).unwrap();
    assert!(rule.residual() < 1e-8, "residual {}", rule.residual());
    assert!(rule.weights().iter().all(|&w| w >= 0.0));
    let defect = verify_exactness(&rule, 12).unwrap();
    assert!(defect < 1e-8, "defect {defect}");
    // weights stay within a small multiple of the uniform weight
    let cap = 4.0 * (4.0 * PI / 400.0);
    let max_w = rule.weights().iter().cloned().fold(0.0, f64::max);
    assert!(max_w <= cap, "max weight {max_w} exceeds {cap}");
    // checking far past the design degree reports a much larger defect
    // (reported, not a failure mode)
    let beyond = verify_exactness(&rule, 24).unwrap();
    assert!(beyond.is_finite() && beyond > defect);
    println!("degree-12 rule on fibonacci(400): defect {defect:.2e}, at degree 24: {beyond:.2e}");
}

#[test]
fn rejects_insufficient_nodes_up_front() {
    let pts = fibonacci_points::<f64>(100).unwrap();
    match build_quadrature(&pts, 200) {
        Err(QuadratureError::TooFewNodes { degree: 200, needed, got: 100 }) => {
            assert_eq!(needed, 101 * 101);
        }
        other => panic!("expected TooFewNodes, got {other:?}"),
    }
    // the Delsarte-Goethals-Seidel counts: tight for the icosahedron
    assert_eq!(minimum_node_count(5), 12);
    assert_eq!(minimum_node_count(4), 9);
    assert_eq!(minimum_node_count(45), 23 * 24);
}

#[test]
fn clustered_nodes_admit_no_positive_rule() {
    // all nodes in the upper cap: the z-moment of degree 1 cannot vanish
    // with nonnegative weights summing to the sphere area
    let pts = PointSet::new(
        (0..150)
            .map(|i| {
                let t = i as f64 / 149.0;
                let z = 0.55 + 0.4 * t;
                let r = (1.0 - z * z).sqrt();
                let phi = 2.0 * PI * (i as f64 * 0.618_033_988_749_895).fract();
                SpherePoint::new(vec![r * phi.cos(), r * phi.sin(), z]).unwrap()
            })
            .collect(),
        None,
    )
    .unwrap();
    match build_quadrature(&pts, 1) {
        Err(QuadratureError::NoPositiveRule { residual, .. }) => {
            assert!(residual > 1e-8);
        }
        other => panic!("expected NoPositiveRule, got {other:?}"),
    }
}

#[test]
fn weight_bound_constant_stays_small_on_fibonacci_nodes() {
    for &n in &[200usize, 400, 1000] {
        let s = ((n as f64).sqrt() / 2.0).floor() as usize;
        let pts = fibonacci_points::<f64>(n).unwrap();
        let rule = build_quadrature(&pts, s).unwrap();
        assert!(
            rule.c1_observed() <= 8.0,
            "n={n}, s={s}: c1 = {}",
            rule.c1_observed()
        );
        println!("n={n}, s={s}: c1_observed = {:.3}", rule.c1_observed());
    }
}

#[test]
fn default_degree_keeps_system_underdetermined() {
    assert_eq!(default_degree(400), 13); // 14^2 = 196 <= 200
    assert_eq!(default_degree(2), 0);
    for &n in &[50usize, 200, 1038] {
        let s = default_degree(n);
        assert!((s + 1) * (s + 1) <= n / 2);
        assert!((s + 2) * (s + 2) > n / 2);
    }
}

#[test]
fn mz_ratio_is_one_inside_the_exact_regime() {
    let pts = fibonacci_points::<f64>(300).unwrap();
    let rule = build_quadrature(&pts, 8).unwrap();
    // constants
    let constant = BandLimited::single(2, 0, 1, 2.0).unwrap();
    let diag = mz_ratio(&rule, &constant).unwrap();
    assert_abs_diff_eq!(diag.ratio, 1.0, epsilon = 1e-8);
    // any polynomial of degree <= s/2: p^2 has degree <= s, so the rule
    // integrates it exactly
    for seed in 0..3 {
        let p = random_bandlimited(4, seed);
        let diag = mz_ratio(&rule, &p).unwrap();
        assert_abs_diff_eq!(diag.ratio, 1.0, epsilon = 1e-8);
        assert_relative_eq!(
            diag.discrete_norm_sq,
            diag.continuous_norm_sq,
            max_relative = 1e-8
        );
    }
}

#[test]
fn mz_ratio_rejects_zero_polynomial() {
    let rule = QuadratureRule::uniform(fibonacci_points::<f64>(30).unwrap());
    let zero = BandLimited::new(2, 3);
    assert!(matches!(mz_ratio(&rule, &zero), Err(QuadratureError::ZeroPolynomial)));
}

#[test]
fn mz_ratio_beyond_design_degree_stays_moderate() {
    let pts = fibonacci_points::<f64>(1000).unwrap();
    let rule = build_quadrature(&pts, 12).unwrap();
    for seed in 0..3 {
        let p = random_bandlimited(24, 100 + seed);
        let diag = mz_ratio(&rule, &p).unwrap();
        assert!(
            diag.ratio > 0.25 && diag.ratio < 4.0,
            "seed {seed}: ratio {}",
            diag.ratio
        );
        println!("degree-24 polynomial on degree-12 rule: ratio {:.4}", diag.ratio);
    }
}

#[test]
fn rule_csv_roundtrip() {
    let pts = fibonacci_points::<f64>(64).unwrap();
    let rule = build_quadrature(&pts, 3).unwrap();
    let dir = std::env::temp_dir();
    let path = dir.join(format!("spherefit-rule-test-{}.csv", std::process::id()));
    rule.save(&path).unwrap();
    let loaded = QuadratureRule::<f64>::load(&path).unwrap();
    assert_eq!(loaded.degree(), rule.degree());
    assert_eq!(loaded.len(), rule.len());
    for (a, b) in rule.weights().iter().zip(loaded.weights()) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-15);
    }
    assert!(verify_exactness(&loaded, 3).unwrap() < 1e-8);
    // sidecar gone -> load fails with a pointed error
    std::fs::remove_file(path.with_extension("json")).unwrap();
    assert!(matches!(
        QuadratureRule::<f64>::load(&path),
        Err(QuadratureError::SidecarMissing(_))
    ));
    std::fs::remove_file(&path).ok();
}
