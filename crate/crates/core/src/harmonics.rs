//! Spherical-harmonic machinery: dimension counts, normalized Legendre
//! (Gegenbauer) polynomials for any ambient dimension, a real orthonormal
//! harmonic basis on `S^2`, and band-limited function representations.
//!
//! Conventions: Lebesgue surface measure `d omega` with total mass
//! `Omega_d` (no normalization to 1); the basis on `S^2` is orthonormal in
//! `L^2(S^2, d omega)`, so `Y_{0,1} = 1 / sqrt(4 pi)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::SpherePoint;
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum HarmonicsError {
    #[error("harmonic dimension overflows 64-bit integers for degree {k}, ambient {d}")]
    Overflow { k: usize, d: usize },
    #[error("ambient dimension must be at least 1, got {0}")]
    BadAmbient(usize),
    #[error("harmonic evaluation is implemented for S^2 only, got d = {0}")]
    UnsupportedDimension(usize),
    #[error("order {order} out of range 1..={dim} for degree {degree}")]
    BadOrder { degree: usize, order: usize, dim: u64 },
    #[error("degree {degree} exceeds the declared maximum {max}")]
    DegreeAboveMax { degree: usize, max: usize },
    #[error("index has ambient dimension {got}, expected {expected}")]
    AmbientMismatch { expected: usize, got: usize },
}

/// Exact binomial coefficient in 128-bit arithmetic, `None` on overflow.
fn binom(n: u128, r: u128) -> Option<u128> {
    if r > n {
        return Some(0);
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc.checked_mul(n - r + 1 + i)?;
        acc /= i + 1; // exact: product of j consecutive integers is divisible by j!
    }
    Some(acc)
}

/// Dimension of the space of spherical harmonics of degree `k` on `S^d`:
/// 1 for `k = 0`, otherwise `(2k + d - 1)/(k + d - 1) * C(k + d - 1, k)`,
/// evaluated in exact integer arithmetic as `C(k+d-1, k) + C(k+d-2, k-1)`.
pub fn dim_harmonic(k: usize, d: usize) -> Result<u64, HarmonicsError> {
    if d < 1 {
        return Err(HarmonicsError::BadAmbient(d));
    }
    if k == 0 {
        return Ok(1);
    }
    let (k, d) = (k as u128, d as u128);
    let value = binom(k + d - 1, k)
        .zip(binom(k + d - 2, k - 1))
        .and_then(|(a, b)| a.checked_add(b))
        .ok_or(HarmonicsError::Overflow { k: k as usize, d: d as usize })?;
    u64::try_from(value).map_err(|_| HarmonicsError::Overflow { k: k as usize, d: d as usize })
}

/// Dimension of the spherical polynomial space of degree at most `s`,
/// i.e. the sum of the harmonic dimensions up to `s`.
pub fn dim_polyspace(s: usize, d: usize) -> Result<u64, HarmonicsError> {
    let mut total: u64 = 0;
    for k in 0..=s {
        total = total
            .checked_add(dim_harmonic(k, d)?)
            .ok_or(HarmonicsError::Overflow { k, d })?;
    }
    Ok(total)
}

/// Normalized Legendre polynomial `P_k^{d+1}(t)` with `P_k^{d+1}(1) = 1`,
/// by the three-term recurrence
/// `(k + d - 1) P_{k+1} = (2k + d - 1) t P_k - k P_{k-1}`.
///
/// Inputs outside `[-1, 1]` are clamped (with a warning); the result then
/// satisfies `|P_k^{d+1}(t)| <= 1`.
pub fn legendre<T: Real>(k: usize, d: usize, t: T) -> T {
    debug_assert!(d >= 1);
    let t = clamp_argument(t);
    let mut prev = T::one();
    if k == 0 {
        return prev;
    }
    let mut cur = t;
    for i in 1..k {
        let next = (T::of((2 * i + d - 1) as f64) * t * cur - T::of(i as f64) * prev)
            / T::of((i + d - 1) as f64);
        prev = cur;
        cur = next;
    }
    cur
}

/// All `P_k^{d+1}(t)` for `k = 0..=kmax`, sharing one recurrence pass.
pub fn legendre_seq<T: Real>(kmax: usize, d: usize, t: T) -> Vec<T> {
    debug_assert!(d >= 1);
    let t = clamp_argument(t);
    let mut out = Vec::with_capacity(kmax + 1);
    out.push(T::one());
    if kmax == 0 {
        return out;
    }
    out.push(t);
    for i in 1..kmax {
        let next = (T::of((2 * i + d - 1) as f64) * t * out[i] - T::of(i as f64) * out[i - 1])
            / T::of((i + d - 1) as f64);
        out.push(next);
    }
    out
}

fn clamp_argument<T: Real>(t: T) -> T {
    if t > T::one() || t < -T::one() {
        if (t.abs() - T::one()) > T::geom_tol() * T::of(1e3) {
            log::warn!("Legendre argument {t} outside [-1, 1]; clamping");
        }
        t.clamp(-T::one(), T::one())
    } else {
        t
    }
}

/// Evaluates the real orthonormal spherical harmonics on `S^2` up to
/// degree `s` at `x`, returning `(s+1)^2` values.
///
/// Ordering: degree `k` ascending; within a degree, order `l = 1..=2k+1`
/// corresponds to `m = l - 1 - k` ascending from `-k` (sine components)
/// through `0` to `+k` (cosine components). The flat index of `(k, l)` is
/// `k^2 + l - 1`.
pub fn eval_real_sph_harmonics<T: Real>(
    x: &SpherePoint<T>,
    s: usize,
) -> Result<Vec<T>, HarmonicsError> {
    if x.dim() != 2 {
        return Err(HarmonicsError::UnsupportedDimension(x.dim()));
    }
    let c = x.coords();
    let ct = c[2];
    let st = (c[0] * c[0] + c[1] * c[1]).sqrt();
    let phi = c[1].atan2(c[0]);
    let sqrt2 = T::of(std::f64::consts::SQRT_2);

    let mut out = vec![T::zero(); (s + 1) * (s + 1)];
    // Fully normalized associated Legendre values Q_k^m(cos theta), with
    // the sqrt(1/4pi)-type constants folded in so that the assembled Y are
    // orthonormal against the unnormalized surface measure.
    let mut qmm = T::of(1.0 / (4.0 * std::f64::consts::PI).sqrt());
    for m in 0..=s {
        if m > 0 {
            qmm = qmm * st * T::of(((2 * m + 1) as f64 / (2 * m) as f64).sqrt());
        }
        let (cos_m, sin_m) = if m == 0 {
            (T::one(), T::zero())
        } else {
            let a = T::of(m as f64) * phi;
            (a.cos(), a.sin())
        };
        let mut q_prev = T::zero();
        let mut q = qmm;
        for k in m..=s {
            if k > m {
                let kf = k as f64;
                let mf = m as f64;
                let a = T::of(((4.0 * kf * kf - 1.0) / (kf * kf - mf * mf)).sqrt());
                let b = if k >= m + 2 {
                    let km1 = kf - 1.0;
                    T::of((((km1 * km1 - mf * mf) / (4.0 * km1 * km1 - 1.0)).sqrt()) as f64)
                } else {
                    T::zero()
                };
                let next = a * (ct * q - b * q_prev);
                q_prev = q;
                q = next;
            }
            let base = k * k + k;
            if m == 0 {
                out[base] = q;
            } else {
                out[base + m] = sqrt2 * q * cos_m;
                out[base - m] = sqrt2 * q * sin_m;
            }
        }
    }
    Ok(out)
}

/// Index `(k, l)` of a real spherical harmonic on `S^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HarmonicIndex {
    pub degree: usize,
    pub order: usize,
    pub ambient: usize,
}

impl HarmonicIndex {
    pub fn new(degree: usize, order: usize, ambient: usize) -> Result<Self, HarmonicsError> {
        let dim = dim_harmonic(degree, ambient)?;
        if order < 1 || order as u64 > dim {
            return Err(HarmonicsError::BadOrder { degree, order, dim });
        }
        Ok(Self { degree, order, ambient })
    }

    /// Flat position in the `(s+1)^2` evaluation vector (`d = 2` layout).
    pub fn flat(&self) -> usize {
        self.degree * self.degree + self.order - 1
    }
}

/// A function with finitely many harmonic coefficients, `f = sum f_hat Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandLimited<T> {
    d: usize,
    max_degree: usize,
    coeffs: BTreeMap<HarmonicIndex, T>,
}

impl<T: Real> BandLimited<T> {
    pub fn new(d: usize, max_degree: usize) -> Self {
        Self { d, max_degree, coeffs: BTreeMap::new() }
    }

    pub fn ambient(&self) -> usize {
        self.d
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn coefficients(&self) -> impl Iterator<Item = (&HarmonicIndex, &T)> {
        self.coeffs.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.values().all(|&v| v == T::zero())
    }

    pub fn set(&mut self, index: HarmonicIndex, value: T) -> Result<(), HarmonicsError> {
        if index.ambient != self.d {
            return Err(HarmonicsError::AmbientMismatch { expected: self.d, got: index.ambient });
        }
        if index.degree > self.max_degree {
            return Err(HarmonicsError::DegreeAboveMax {
                degree: index.degree,
                max: self.max_degree,
            });
        }
        self.coeffs.insert(index, value);
        Ok(())
    }

    /// Single-coefficient convenience constructor.
    pub fn single(d: usize, k: usize, l: usize, value: T) -> Result<Self, HarmonicsError> {
        let mut f = Self::new(d, k);
        f.set(HarmonicIndex::new(k, l, d)?, value)?;
        Ok(f)
    }

    /// Builds from the dense `(s+1)^2` coefficient layout (`d = 2`).
    pub fn from_dense(s: usize, dense: &[T]) -> Result<Self, HarmonicsError> {
        assert_eq!(dense.len(), (s + 1) * (s + 1), "dense coefficient length mismatch");
        let mut f = Self::new(2, s);
        for k in 0..=s {
            for l in 1..=2 * k + 1 {
                let v = dense[k * k + l - 1];
                if v != T::zero() {
                    f.set(HarmonicIndex::new(k, l, 2)?, v)?;
                }
            }
        }
        Ok(f)
    }

    /// Dense `(s+1)^2` coefficient vector aligned with
    /// [`eval_real_sph_harmonics`] (`d = 2`).
    pub fn to_dense(&self) -> Vec<T> {
        let mut dense = vec![T::zero(); (self.max_degree + 1) * (self.max_degree + 1)];
        for (idx, &v) in &self.coeffs {
            dense[idx.flat()] = v;
        }
        dense
    }

    /// Pointwise evaluation `sum f_hat_{k,l} Y_{k,l}(x)`; `d = 2` only.
    pub fn eval(&self, x: &SpherePoint<T>) -> Result<T, HarmonicsError> {
        if self.d != 2 {
            return Err(HarmonicsError::UnsupportedDimension(self.d));
        }
        if x.dim() != 2 {
            return Err(HarmonicsError::UnsupportedDimension(x.dim()));
        }
        if self.coeffs.is_empty() {
            return Ok(T::zero());
        }
        let basis = eval_real_sph_harmonics(x, self.max_degree)?;
        Ok(self.coeffs.iter().map(|(idx, &v)| v * basis[idx.flat()]).sum())
    }

    /// Squared `L^2(S^d, d omega)` norm via Parseval (orthonormal basis).
    pub fn l2_norm_sq(&self) -> T {
        self.coeffs.values().map(|&v| v * v).sum()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let coeffs: Vec<serde_json::Value> = self
            .coeffs
            .iter()
            .map(|(idx, v)| serde_json::json!([idx.degree, idx.order, v]))
            .collect();
        serde_json::json!({ "d": self.d, "max_degree": self.max_degree, "coeffs": coeffs })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, String> {
        let d = value["d"].as_u64().ok_or("missing field 'd'")? as usize;
        let max_degree = value["max_degree"].as_u64().ok_or("missing field 'max_degree'")? as usize;
        let mut f = Self::new(d, max_degree);
        let coeffs = value["coeffs"].as_array().ok_or("missing field 'coeffs'")?;
        for entry in coeffs {
            let triple = entry.as_array().filter(|a| a.len() == 3).ok_or("coeff entry must be [k, l, value]")?;
            let k = triple[0].as_u64().ok_or("bad degree")? as usize;
            let l = triple[1].as_u64().ok_or("bad order")? as usize;
            let v = triple[2].as_f64().ok_or("bad value")?;
            let idx = HarmonicIndex::new(k, l, d).map_err(|e| e.to_string())?;
            f.set(idx, T::of(v)).map_err(|e| e.to_string())?;
        }
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::random_points;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn harmonic_dimensions_match_formula() {
        assert_eq!(dim_harmonic(0, 2).unwrap(), 1);
        assert_eq!(dim_harmonic(1, 2).unwrap(), 3);
        for k in 0..200 {
            assert_eq!(dim_harmonic(k, 2).unwrap(), 2 * k as u64 + 1);
        }
        // sum over degrees up to 45 on S^2 is 46^2
        assert_eq!(dim_polyspace(45, 2).unwrap(), 2116);
    }

    /// Independent oracle: dim H_k = (monomials of degree k) - (monomials of
    /// degree k-2) in d+1 variables, counted by explicit enumeration.
    fn count_monomials(degree: isize, vars: usize) -> u64 {
        if degree < 0 {
            return 0;
        }
        fn rec(remaining: usize, vars_left: usize) -> u64 {
            if vars_left == 1 {
                return 1;
            }
            (0..=remaining).map(|take| rec(remaining - take, vars_left - 1)).sum()
        }
        rec(degree as usize, vars)
    }

    #[test]
    fn harmonic_dimensions_match_monomial_enumeration() {
        for d in 1..=3usize {
            for k in 0..=6isize {
                let expect = count_monomials(k, d + 1) - count_monomials(k - 2, d + 1);
                assert_eq!(
                    dim_harmonic(k as usize, d).unwrap(),
                    expect,
                    "k={k}, d={d}"
                );
            }
        }
    }

    #[test]
    fn harmonic_dimension_overflow_is_an_error() {
        assert!(matches!(
            dim_harmonic(usize::MAX / 2, 40),
            Err(HarmonicsError::Overflow { .. })
        ));
    }

    #[test]
    fn legendre_is_one_at_one() {
        for d in 1..=5 {
            for k in [0usize, 1, 2, 7, 33, 60] {
                assert_abs_diff_eq!(legendre(k, d, 1.0f64), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn legendre_classical_values_for_d2() {
        // P_2(t) = (3 t^2 - 1) / 2
        assert_abs_diff_eq!(legendre(2, 2, 0.0f64), -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(legendre(2, 2, 0.6f64), (3.0 * 0.36 - 1.0) / 2.0, epsilon = 1e-15);
        // P_3(t) = (5 t^3 - 3 t) / 2
        assert_abs_diff_eq!(legendre(3, 2, 0.4f64), (5.0 * 0.064 - 1.2) / 2.0, epsilon = 1e-15);
    }

    /// Independent oracle: Gegenbauer polynomial by its explicit sum,
    /// normalized to 1 at t = 1, with coefficients from ln_gamma.
    fn gegenbauer_normalized(k: usize, d: usize, t: f64) -> f64 {
        use crate::kernels::special::ln_gamma;
        let lambda = (d as f64 - 1.0) / 2.0;
        let value = |t: f64| -> f64 {
            (0..=k / 2)
                .map(|j| {
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    let ln = ln_gamma(lambda + (k - j) as f64) - ln_gamma(lambda)
                        - ln_gamma(j as f64 + 1.0)
                        - ln_gamma((k - 2 * j) as f64 + 1.0);
                    sign * ln.exp() * (2.0 * t).powi((k - 2 * j) as i32)
                })
                .sum()
        };
        value(t) / value(1.0)
    }

    #[test]
    fn legendre_matches_gegenbauer_series_oracle() {
        for d in [2usize, 3, 4] {
            for k in [1usize, 2, 5, 7, 10] {
                for &t in &[-0.9, -0.3, 0.0, 0.3, 0.77] {
                    assert_relative_eq!(
                        legendre(k, d, t),
                        gegenbauer_normalized(k, d, t),
                        epsilon = 1e-11,
                        max_relative = 1e-9
                    );
                }
            }
        }
        // spot value: k=7, d=4, t=0.3 stays bounded by 1 in magnitude
        let v: f64 = legendre(7, 4, 0.3);
        assert!(v.abs() <= 1.0);
        assert_relative_eq!(v, gegenbauer_normalized(7, 4, 0.3), max_relative = 1e-9);
    }

    #[test]
    fn legendre_bounded_on_grid() {
        for d in [2usize, 3, 4] {
            for k in [1usize, 5, 17, 42, 60] {
                for i in 0..=1000 {
                    let t = -1.0 + 2.0 * i as f64 / 1000.0;
                    let v: f64 = legendre(k, d, t);
                    assert!(v.abs() <= 1.0 + 1e-12, "P_{k}^{}({t}) = {v}", d + 1);
                }
            }
        }
    }

    #[test]
    fn constant_harmonic_value() {
        let pts = random_points::<f64>(8, 1).unwrap();
        for x in pts.points() {
            let y = eval_real_sph_harmonics(x, 0).unwrap();
            assert_abs_diff_eq!(y[0], 1.0 / (4.0 * PI).sqrt(), epsilon = 1e-14);
        }
    }

    #[test]
    fn addition_formula_diagonal() {
        // sum_l Y_{k,l}(x)^2 = d_k / (4 pi) since P_k(1) = 1
        let pts = random_points::<f64>(5, 7).unwrap();
        for x in pts.points() {
            let y = eval_real_sph_harmonics(x, 3).unwrap();
            for k in 0..=3usize {
                let sum: f64 = (0..2 * k + 1).map(|i| y[k * k + i] * y[k * k + i]).sum();
                assert_relative_eq!(sum, (2 * k + 1) as f64 / (4.0 * PI), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn addition_formula_off_diagonal() {
        // sum_l Y_{k,l}(x) Y_{k,l}(x') = (d_k / Omega_2) P_k(x . x')
        let pts = random_points::<f64>(12, 99).unwrap();
        for pair in pts.points().chunks(2) {
            let (x, xp) = (&pair[0], &pair[1]);
            let yx = eval_real_sph_harmonics(x, 10).unwrap();
            let yxp = eval_real_sph_harmonics(xp, 10).unwrap();
            let t = x.dot(xp);
            for k in 0..=10usize {
                let sum: f64 = (0..2 * k + 1).map(|i| yx[k * k + i] * yxp[k * k + i]).sum();
                let expect = (2 * k + 1) as f64 / (4.0 * PI) * legendre(k, 2, t);
                assert_abs_diff_eq!(sum, expect, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn harmonics_reject_wrong_dimension() {
        let x = SpherePoint::new(vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            eval_real_sph_harmonics(&x, 2),
            Err(HarmonicsError::UnsupportedDimension(1))
        ));
    }

    #[test]
    fn bandlimited_eval_basics() {
        let x = SpherePoint::new(vec![0.3, -0.5, 0.81]).unwrap();
        // empty sum is the zero function
        let zero = BandLimited::<f64>::new(2, 4);
        assert_eq!(zero.eval(&x).unwrap(), 0.0);
        // f_hat_{0,1} = sqrt(4 pi) gives the constant 1
        let one = BandLimited::single(2, 0, 1, (4.0 * PI).sqrt()).unwrap();
        assert_abs_diff_eq!(one.eval(&x).unwrap(), 1.0, epsilon = 1e-14);
        // linearity in the coefficients
        let y21 = BandLimited::single(2, 2, 1, 2.5).unwrap();
        let basis = eval_real_sph_harmonics(&x, 2).unwrap();
        assert_relative_eq!(y21.eval(&x).unwrap(), 2.5 * basis[4], epsilon = 1e-14);
        assert_eq!(y21.l2_norm_sq(), 6.25);
    }

    #[test]
    fn bandlimited_validates_indices() {
        let mut f = BandLimited::<f64>::new(2, 3);
        assert!(matches!(
            f.set(HarmonicIndex::new(4, 1, 2).unwrap(), 1.0),
            Err(HarmonicsError::DegreeAboveMax { degree: 4, max: 3 })
        ));
        assert!(matches!(
            HarmonicIndex::new(2, 6, 2),
            Err(HarmonicsError::BadOrder { degree: 2, order: 6, dim: 5 })
        ));
        assert!(matches!(
            f.set(HarmonicIndex::new(1, 1, 3).unwrap(), 1.0),
            Err(HarmonicsError::AmbientMismatch { expected: 2, got: 3 })
        ));
    }

    proptest! {
        #[test]
        fn bandlimited_json_roundtrip(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let s = rng.random_range(0usize..6);
            let mut f = BandLimited::<f64>::new(2, s);
            for k in 0..=s {
                for l in 1..=2 * k + 1 {
                    if rng.random_bool(0.4) {
                        f.set(HarmonicIndex::new(k, l, 2).unwrap(), rng.random_range(-2.0..2.0)).unwrap();
                    }
                }
            }
            let json = f.to_json();
            let back = BandLimited::<f64>::from_json(&json).unwrap();
            prop_assert_eq!(f, back);
        }
    }
}
