use std::f64::consts::PI;

use approx::{assert_abs_diff_eq, assert_relative_eq};
use proptest::prelude::*;

use super::*;

fn p(coords: &[f64]) -> SpherePoint<f64> {
    SpherePoint::new(coords.to_vec()).unwrap()
}

#[test]
fn geodesic_distance_basics() {
    let np = p(&[0.0, 0.0, 1.0]);
    let sp = p(&[0.0, 0.0, -1.0]);
    let ex = p(&[1.0, 0.0, 0.0]);
    let ey = p(&[0.0, 1.0, 0.0]);
    assert_eq!(geodesic_distance(&np, &np).unwrap(), 0.0);
    assert_abs_diff_eq!(geodesic_distance(&np, &sp).unwrap(), PI, epsilon = 1e-15);
    assert_abs_diff_eq!(geodesic_distance(&ex, &ey).unwrap(), PI / 2.0, epsilon = 1e-15);
    // symmetry
    assert_eq!(
        geodesic_distance(&ex, &np).unwrap(),
        geodesic_distance(&np, &ex).unwrap()
    );
}

#[test]
fn geodesic_distance_rejects_dimension_mismatch() {
    let a = p(&[1.0, 0.0, 0.0]);
    let b = SpherePoint::new(vec![1.0, 0.0]).unwrap();
    assert!(matches!(
        geodesic_distance(&a, &b),
        Err(GeometryError::DimensionMismatch(2, 1))
    ));
}

#[test]
fn construction_normalizes_and_rejects_degenerate() {
    let q = SpherePoint::new(vec![3.0, 0.0, 4.0]).unwrap();
    assert_abs_diff_eq!(q.coords()[0], 0.6, epsilon = 1e-15);
    assert_abs_diff_eq!(q.coords()[2], 0.8, epsilon = 1e-15);
    assert!(SpherePoint::new(vec![0.0, 0.0, 0.0]).is_err());
    assert!(SpherePoint::new(vec![f64::NAN, 0.0, 0.0]).is_err());
    assert!(SpherePoint::new(vec![1.0]).is_err());
}

#[test]
fn point_set_rejects_duplicates_and_mixed_dims() {
    let a = p(&[1.0, 0.0, 0.0]);
    let b = p(&[1.0 + 1e-15, 0.0, 0.0]);
    assert!(matches!(
        PointSet::new(vec![a.clone(), b], None),
        Err(GeometryError::DuplicatePoints(0, 1))
    ));
    let c = SpherePoint::new(vec![1.0, 0.0]).unwrap();
    assert!(matches!(
        PointSet::new(vec![a, c], None),
        Err(GeometryError::DimensionMismatch(2, 1))
    ));
    assert!(matches!(PointSet::new(Vec::<SpherePoint<f64>>::new(), None), Err(GeometryError::Empty)));
}

#[test]
fn antipodal_pair_metrics() {
    let pts = PointSet::new(vec![p(&[0.0, 0.0, 1.0]), p(&[0.0, 0.0, -1.0])], None).unwrap();
    let m = mesh_metrics(&pts).unwrap();
    assert_abs_diff_eq!(m.separation_radius, PI / 2.0, epsilon = 1e-12);
    // every probe is within pi/2 of a pole
    assert!(m.mesh_norm <= PI / 2.0 + 1e-12);
    assert_eq!(m.mesh_ratio, 1.0); // probe value clipped to the exact lower bound
}

fn octahedron() -> PointSet<f64> {
    PointSet::new(
        vec![
            p(&[1.0, 0.0, 0.0]),
            p(&[-1.0, 0.0, 0.0]),
            p(&[0.0, 1.0, 0.0]),
            p(&[0.0, -1.0, 0.0]),
            p(&[0.0, 0.0, 1.0]),
            p(&[0.0, 0.0, -1.0]),
        ],
        None,
    )
    .unwrap()
}

#[test]
fn octahedron_metrics_match_analytic_values() {
    let m = mesh_metrics(&octahedron()).unwrap();
    // minimal pairwise angle is pi/2
    assert_abs_diff_eq!(m.separation_radius, PI / 4.0, epsilon = 1e-12);
    // true covering radius is the angle to a face center, acos(1/sqrt(3));
    // the probe-grid value is a lower bound within 2%
    let exact = (1.0f64 / 3.0f64.sqrt()).acos();
    assert_abs_diff_eq!(exact, 0.955_316_618_124_509_3, epsilon = 1e-15);
    assert!(m.mesh_norm <= exact + 1e-12);
    assert!(m.mesh_norm >= exact * 0.98, "probe grid too coarse: {}", m.mesh_norm);
    assert_relative_eq!(m.mesh_ratio, m.mesh_norm / m.separation_radius, epsilon = 1e-15);
}

#[test]
fn mesh_metrics_error_paths() {
    let single = PointSet::new(vec![p(&[0.0, 0.0, 1.0])], None).unwrap();
    assert!(matches!(
        mesh_metrics(&single),
        Err(GeometryError::TooFewPoints { needed: 2, got: 1 })
    ));
}

#[test]
fn probe_density_is_converged() {
    let pts = fibonacci_points::<f64>(200).unwrap();
    let coarse = mesh_metrics_with_probe(&pts, 100).unwrap().mesh_norm;
    let fine = mesh_metrics_with_probe(&pts, 200).unwrap().mesh_norm;
    // probe maximum is a lower bound that grows with density
    assert!(fine >= coarse - 1e-12);
    assert!((fine - coarse) / fine < 0.02, "coarse {coarse} fine {fine}");
}

#[test]
fn equal_area_center_of_single_region_is_north_pole() {
    let pts = equal_area_centers::<f64>(1).unwrap();
    assert_eq!(pts.len(), 1);
    assert_eq!(pts.point(0).coords(), &[0.0, 0.0, 1.0]);
}

#[test]
fn equal_area_centers_have_exact_count() {
    for n in 1..=40 {
        let pts = equal_area_centers::<f64>(n).unwrap();
        assert_eq!(pts.len(), n, "n={n}");
    }
    assert_eq!(equal_area_centers::<f64>(400).unwrap().len(), 400);
}

#[test]
fn equal_area_ten_centers_are_spread_apart() {
    // the ten bump centers of the Wendland target must be mutually farther
    // than the support radius 1 in chordal distance
    let pts = equal_area_centers::<f64>(10).unwrap();
    for i in 0..10 {
        for j in i + 1..10 {
            let c = pts.point(i).chordal_distance(pts.point(j));
            assert!(c >= 1.0, "centers {i},{j} too close: {c}");
        }
    }
}

#[test]
fn fibonacci_lattice_is_quasi_uniform() {
    let pts = fibonacci_points::<f64>(1038).unwrap();
    let m = mesh_metrics(&pts).unwrap();
    assert!(m.mesh_ratio < 4.0, "mesh ratio {}", m.mesh_ratio);
    assert!(m.mesh_ratio >= 1.0);
}

#[test]
fn fibonacci_mesh_ratio_bounded_across_sizes() {
    for &n in &[100usize, 500, 1038, 5000] {
        let pts = fibonacci_points::<f64>(n).unwrap();
        let m = mesh_metrics(&pts).unwrap();
        assert!(m.mesh_ratio < 6.0, "n={n}: ratio {}", m.mesh_ratio);
    }
}

#[test]
fn spiral_points_count_and_norms() {
    let pts = spiral_points::<f64>(10_000).unwrap();
    assert_eq!(pts.len(), 10_000);
    for q in pts.points() {
        let norm: f64 = q.coords().iter().map(|c| c * c).sum::<f64>().sqrt();
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
    }
    assert_eq!(spiral_points::<f64>(1).unwrap().point(0).coords(), &[0.0, 0.0, 1.0]);
}

#[test]
fn generators_reject_zero_count() {
    assert!(matches!(fibonacci_points::<f64>(0), Err(GeometryError::BadCount(0))));
    assert!(matches!(spiral_points::<f64>(0), Err(GeometryError::BadCount(0))));
    assert!(matches!(equal_area_centers::<f64>(0), Err(GeometryError::BadCount(0))));
}

#[test]
fn rotation_basics() {
    let pts = PointSet::new(
        vec![p(&[1.0, 0.0, 0.0]), p(&[0.0, 0.0, 1.0]), p(&[0.5, 0.5, 0.707_106_781_186_547_6])],
        None,
    )
    .unwrap();
    // j = 0 is the identity
    let r0 = rotate(&pts, 0).unwrap();
    for (a, b) in pts.points().iter().zip(r0.points()) {
        assert_eq!(a.coords(), b.coords());
    }
    // j = 5 rotates by pi/2
    let r5 = rotate(&pts, 5).unwrap();
    assert_abs_diff_eq!(r5.point(0).coords()[0], 0.0, epsilon = 1e-15);
    assert_abs_diff_eq!(r5.point(0).coords()[1], 1.0, epsilon = 1e-15);
    // the axis is fixed for any j
    for j in 0..20 {
        let r = rotate(&pts, j).unwrap();
        assert_eq!(r.point(1).coords(), &[0.0, 0.0, 1.0]);
    }
}

#[test]
fn rotation_rejects_wrong_dimension() {
    let c = SpherePoint::new(vec![1.0, 0.0]).unwrap();
    let pts = PointSet::new(vec![c], None).unwrap();
    assert!(matches!(
        rotate(&pts, 1),
        Err(GeometryError::UnsupportedDimension { expected: 2, got: 1 })
    ));
}

#[test]
fn random_points_are_deterministic_in_seed() {
    let a = random_points::<f64>(50, 42).unwrap();
    let b = random_points::<f64>(50, 42).unwrap();
    let c = random_points::<f64>(50, 43).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn csv_roundtrip_and_rejection() {
    let dir = std::env::temp_dir();
    let path = dir.join(format!("spherefit-geom-test-{}.csv", std::process::id()));
    let pts = fibonacci_points::<f64>(37).unwrap();
    save_point_set(&pts, &path).unwrap();
    let loaded = load_point_set::<f64>(&path, false).unwrap();
    assert_eq!(loaded.len(), 37);
    for (a, b) in pts.points().iter().zip(loaded.points()) {
        assert!(a.chordal_distance(b) < 1e-12);
    }

    // a row far from unit norm is rejected unless lenient
    std::fs::write(&path, "x0,x1,x2\n1.0,0.0,0.0\n0.5,0.5,0.5\n").unwrap();
    assert!(matches!(
        load_point_set::<f64>(&path, false),
        Err(GeometryError::NormOutOfTolerance { line: 3, .. })
    ));
    let lenient = load_point_set::<f64>(&path, true).unwrap();
    assert_eq!(lenient.len(), 2);
    let norm: f64 = lenient.point(1).coords().iter().map(|c| c * c).sum::<f64>().sqrt();
    assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-15);

    // malformed header
    std::fs::write(&path, "a,b,c\n1.0,0.0,0.0\n").unwrap();
    assert!(matches!(load_point_set::<f64>(&path, false), Err(GeometryError::Parse { line: 1, .. })));
    std::fs::remove_file(&path).ok();
}

proptest! {
    #[test]
    fn generated_points_have_unit_norm(n in 1usize..200, kind in 0usize..3) {
        let kind = [GeneratorKind::Spiral, GeneratorKind::Fibonacci, GeneratorKind::EqualAreaCenters][kind];
        let pts = generate::<f64>(kind, n).unwrap();
        prop_assert_eq!(pts.len(), n);
        for q in pts.points() {
            let norm: f64 = q.coords().iter().map(|c| c * c).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_is_an_isometry(j in 0usize..40, seed in 0u64..500) {
        let pts = random_points::<f64>(12, seed).unwrap();
        let rot = rotate(&pts, j).unwrap();
        for a in 0..pts.len() {
            for b in a + 1..pts.len() {
                let before = geodesic_distance(pts.point(a), pts.point(b)).unwrap();
                let after = geodesic_distance(rot.point(a), rot.point(b)).unwrap();
                prop_assert!((before - after).abs() < 1e-12);
            }
        }
    }
}
