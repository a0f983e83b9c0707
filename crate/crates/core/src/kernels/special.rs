//! Special functions and one-dimensional Gauss rules backing the kernel
//! families: log-gamma, modified Bessel functions of the first kind, and
//! Gauss-Gegenbauer quadrature for projection integrals with weight
//! `(1 - t^2)^alpha`.
//!
//! Internal evaluation is done in `f64`; results are converted to the
//! caller's scalar type at the boundary.

use crate::linalg::{symmetric_eigen, Matrix};
use crate::scalar::Real;

/// Lanczos approximation (g = 7, 9 coefficients), accurate to ~1e-15
/// relative error over the real line away from the poles.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // reflection formula
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `ln I_nu(x)` for `nu >= 0`, `x >= 0`, from the ascending series
/// `I_nu(x) = sum_j (x/2)^{nu+2j} / (j! Gamma(nu+j+1))`,
/// accumulated in log space so large arguments neither overflow nor
/// underflow. Returns `-inf` for `I_nu(0)` with `nu > 0`.
pub fn ln_bessel_i(nu: f64, x: f64) -> f64 {
    assert!(nu >= 0.0 && x >= 0.0, "ln_bessel_i requires nu >= 0 and x >= 0");
    if x == 0.0 {
        return if nu == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let ln_half_x = (x / 2.0).ln();
    let mut terms: Vec<f64> = Vec::new();
    let mut max_term = f64::NEG_INFINITY;
    let mut j = 0usize;
    loop {
        let jf = j as f64;
        let t = (nu + 2.0 * jf) * ln_half_x - ln_gamma(jf + 1.0) - ln_gamma(nu + jf + 1.0);
        terms.push(t);
        max_term = max_term.max(t);
        // The series peaks near j ~ x/2; stop once well past the peak and
        // the terms are negligible relative to the largest one.
        if jf > x / 2.0 && t < max_term - 45.0 {
            break;
        }
        j += 1;
        assert!(j < 100_000, "Bessel series failed to converge (nu={nu}, x={x})");
    }
    let sum: f64 = terms.iter().map(|&t| (t - max_term).exp()).sum();
    max_term + sum.ln()
}

/// Nodes and weights of the `n`-point Gauss rule for the weight
/// `(1 - t^2)^alpha` on `[-1, 1]` (Gauss-Gegenbauer; `alpha = 0` is
/// Gauss-Legendre), built by Golub-Welsch on the Jacobi matrix of the
/// monic recurrence.
pub fn gauss_gegenbauer<T: Real>(n: usize, alpha: f64) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1, "quadrature needs at least one node");
    assert!(alpha > -1.0, "weight exponent must exceed -1");
    let mut jm = Matrix::<T>::zeros(n, n);
    for k in 1..n {
        let kf = k as f64;
        let ck =
            kf * (kf + 2.0 * alpha) / ((2.0 * kf + 2.0 * alpha + 1.0) * (2.0 * kf + 2.0 * alpha - 1.0));
        let off = T::of(ck.sqrt());
        jm[(k - 1, k)] = off;
        jm[(k, k - 1)] = off;
    }
    let (nodes, vectors) = symmetric_eigen(&jm, true);
    let vectors = vectors.expect("eigenvectors requested");
    let mu0 = T::of(
        (0.5 * std::f64::consts::PI.ln() + ln_gamma(alpha + 1.0) - ln_gamma(alpha + 1.5)).exp(),
    );
    let weights: Vec<T> = (0..n)
        .map(|j| {
            let v0 = vectors[(0, j)];
            mu0 * v0 * v0
        })
        .collect();
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ln_gamma_matches_known_values() {
        assert_relative_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-14);
        assert_relative_eq!(ln_gamma(5.0), 24.0f64.ln(), max_relative = 1e-13);
        // Gamma(1/2) = sqrt(pi)
        assert_relative_eq!(ln_gamma(0.5), 0.5 * std::f64::consts::PI.ln(), max_relative = 1e-13);
        // Gamma(7/2) = 15 sqrt(pi) / 8
        assert_relative_eq!(
            ln_gamma(3.5),
            (15.0 * std::f64::consts::PI.sqrt() / 8.0).ln(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn bessel_series_known_points() {
        // only the j = 0 term survives at x = 0
        assert_eq!(ln_bessel_i(0.0, 0.0), 0.0);
        assert_eq!(ln_bessel_i(1.5, 0.0), f64::NEG_INFINITY);
        // I_{1/2}(x) = sqrt(2/(pi x)) sinh(x)
        for &x in &[0.3, 1.0, 2.0, 10.0, 50.0] {
            let exact = (2.0 / (std::f64::consts::PI * x)).sqrt() * x.sinh();
            assert_relative_eq!(ln_bessel_i(0.5, x), exact.ln(), max_relative = 1e-12);
        }
        // I_{3/2}(x) = sqrt(2/(pi x)) (cosh x - sinh x / x)
        let x = 2.0f64;
        let exact = (2.0 / (std::f64::consts::PI * x)).sqrt() * (x.cosh() - x.sinh() / x);
        assert_relative_eq!(ln_bessel_i(1.5, x), exact.ln(), max_relative = 1e-12);
    }

    #[test]
    fn gauss_legendre_integrates_monomials() {
        let (nodes, weights) = gauss_gegenbauer::<f64>(16, 0.0);
        let integrate = |p: u32| -> f64 {
            nodes.iter().zip(&weights).map(|(&t, &w)| w * t.powi(p as i32)).sum()
        };
        assert_relative_eq!(integrate(0), 2.0, max_relative = 1e-13);
        assert_relative_eq!(integrate(2), 2.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(integrate(4), 2.0 / 5.0, max_relative = 1e-12);
        assert!(integrate(1).abs() < 1e-13);
        // degree 2n-1 = 31 is still exact
        assert_relative_eq!(integrate(30), 2.0 / 31.0, max_relative = 1e-10);
    }

    #[test]
    fn gauss_gegenbauer_integrates_with_weight() {
        // alpha = 1/2: int (1-t^2)^{1/2} dt = pi/2, int t^2 (1-t^2)^{1/2} dt = pi/8
        let (nodes, weights) = gauss_gegenbauer::<f64>(24, 0.5);
        let m0: f64 = weights.iter().sum();
        let m2: f64 = nodes.iter().zip(&weights).map(|(&t, &w)| w * t * t).sum();
        assert_relative_eq!(m0, std::f64::consts::PI / 2.0, max_relative = 1e-12);
        assert_relative_eq!(m2, std::f64::consts::PI / 8.0, max_relative = 1e-11);
    }
}
