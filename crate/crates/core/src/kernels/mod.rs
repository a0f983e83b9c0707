//! Zonal kernels (spherical basis functions) on `S^d`.
//!
//! A kernel is defined by its Fourier-Legendre coefficient sequence
//! `phi_hat_k > 0` and/or a closed-form radial profile in `t = x . x'`.
//! Series kernels are evaluated by a truncated Legendre expansion whose
//! truncation is chosen from an analytic tail bound; closed-form kernels
//! obtain coefficients on demand by numerical projection.

pub mod special;

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::PointSet;
use crate::harmonics::{dim_harmonic, legendre_seq, BandLimited};
use crate::linalg::Matrix;
use crate::scalar::{surface_area, Real};

/// Series truncation target for the analytic tail bound.
const TAIL_TOLERANCE: f64 = 1e-10;
/// Hard cap on the truncation degree. Slowly decaying Sobolev sequences
/// (small gamma) would otherwise demand tens of thousands of terms per
/// evaluation; the recorded `tail_bound` reports what the cap achieves.
const MAX_TRUNCATION: usize = 2048;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("Sobolev smoothness must satisfy gamma > d/2, got gamma = {gamma} with d = {d}")]
    BadSmoothness { gamma: f64, d: usize },
    #[error("width parameter must be positive, got {0}")]
    BadWidth(f64),
    #[error("Gaussian width {tau} is too narrow: the Bessel argument 2/tau^2 = {arg:.3e} exceeds the series range; use a width above ~2e-3")]
    WidthTooNarrow { tau: f64, arg: f64 },
    #[error("Fourier-Legendre coefficient at degree {k} is not strictly positive: {value}")]
    NonPositiveCoefficient { k: usize, value: f64 },
    #[error("psi-norm weight underflows at degree {degree}: phi_hat^r is below the smallest positive scalar")]
    PsiUnderflow { degree: usize },
    #[error("psi-norm exponent must lie in [0, 1], got {0}")]
    BadExponent(f64),
    #[error("kernel lives on S^{expected}, points on S^{got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("band-limited operands live on different spheres: {0} and {1}")]
    OperandMismatch(usize, usize),
    #[error("kernel family '{0}' is not valid in a kernel spec")]
    BadFamily(String),
    #[error("kernel spec for family '{family}' is missing parameter '{param}'")]
    MissingParameter { family: String, param: String },
    #[error(transparent)]
    Harmonics(#[from] crate::harmonics::HarmonicsError),
}

/// Kernel family tag with its defining parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum KernelFamily {
    /// `phi_hat_k = (k (k + d - 1) + 1)^{-gamma}`.
    Sobolev { gamma: f64 },
    /// Coefficients from the modified-Bessel series with width `tau`.
    GaussianSeries { tau: f64 },
    /// `exp(-|x - x'|^2 / (2 sigma^2))` as a function of `t = x . x'`.
    GaussianChordal { sigma: f64 },
    /// `(1 - u)_+^8 (32 u^3 + 25 u^2 + 8 u + 1)` at `u = |x - x'|`.
    Wendland,
    /// Explicit coefficient list (band-limited kernel).
    Custom,
}

impl KernelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Sobolev { .. } => "sobolev",
            Self::GaussianSeries { .. } => "gaussian_series",
            Self::GaussianChordal { .. } => "gaussian_chordal",
            Self::Wendland => "wendland",
            Self::Custom => "custom",
        }
    }
}

/// Flat kernel description used in config files and estimator headers:
/// `{"family": ..., "gamma"?, "tau"?, "sigma"?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

impl KernelSpec {
    pub fn build<T: Real>(&self, d: usize) -> Result<Kernel<T>, KernelError> {
        let need = |p: Option<f64>, name: &str| {
            p.ok_or_else(|| KernelError::MissingParameter {
                family: self.family.clone(),
                param: name.into(),
            })
        };
        match self.family.as_str() {
            "sobolev" => Kernel::sobolev(d, need(self.gamma, "gamma")?),
            "gaussian_series" => Kernel::gaussian_series(d, need(self.tau, "tau")?),
            "gaussian_chordal" => Kernel::gaussian_chordal(d, need(self.sigma, "sigma")?),
            "wendland" => Kernel::wendland(d),
            other => Err(KernelError::BadFamily(other.into())),
        }
    }
}

/// A spherical basis function.
#[derive(Debug, Clone)]
pub struct Kernel<T> {
    d: usize,
    family: KernelFamily,
    truncation: usize,
    tail_bound: T,
    /// `phi_hat_k` for `k <= truncation` (series families; empty otherwise).
    coeffs: Vec<T>,
    /// `phi_hat_k d_k / Omega_d`, the Legendre weights of the expansion.
    series_weights: Vec<T>,
    /// Lazily projected coefficients for closed-form families.
    projection_cache: Arc<Mutex<BTreeMap<usize, T>>>,
}

impl<T: Real> Kernel<T> {
    /// Sobolev-type kernel with smoothness `gamma > d/2`.
    pub fn sobolev(d: usize, gamma: f64) -> Result<Self, KernelError> {
        if !(gamma > d as f64 / 2.0) {
            return Err(KernelError::BadSmoothness { gamma, d });
        }
        let truncation = sobolev_truncation(d, gamma);
        let coeffs: Vec<T> =
            (0..=truncation).map(|k| T::of(sobolev_coefficient(k, d, gamma))).collect();
        let mut kernel = Self {
            d,
            family: KernelFamily::Sobolev { gamma },
            truncation,
            tail_bound: T::of(sobolev_tail_bound(truncation, d, gamma)),
            coeffs,
            series_weights: Vec::new(),
            projection_cache: Arc::new(Mutex::new(BTreeMap::new())),
        };
        kernel.finish_series()?;
        Ok(kernel)
    }

    /// Gaussian kernel defined through its modified-Bessel coefficient
    /// series, `phi_hat_k = e^{-2/tau^2} tau^{d-1} Gamma(d/2) I_{k+(d-1)/2}(2/tau^2)`.
    ///
    /// The coefficient sequence is the definition: it is strictly positive
    /// at every degree (an even profile in `t` such as `e^{-t^2/tau^2}`
    /// would instead have vanishing odd-degree coefficients and fail the
    /// positivity requirement), and up to a constant it expands the
    /// chordal exponential `exp(-(2-2t)/tau^2)`. Evaluation always goes
    /// through the truncated expansion. Distinct from
    /// [`Kernel::gaussian_chordal`], which is a different normalization
    /// used by the simulation experiments; the two are never substituted
    /// for one another.
    pub fn gaussian_series(d: usize, tau: f64) -> Result<Self, KernelError> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(KernelError::BadWidth(tau));
        }
        let arg = 2.0 / (tau * tau);
        if arg > 1e6 {
            return Err(KernelError::WidthTooNarrow { tau, arg });
        }
        let ln_front = -arg + (d as f64 - 1.0) * tau.ln() + special::ln_gamma(d as f64 / 2.0);
        let nu = |k: usize| k as f64 + (d as f64 - 1.0) / 2.0;
        let coefficient = |k: usize| (ln_front + special::ln_bessel_i(nu(k), arg)).exp();

        let omega = surface_area::<f64>(d);
        let mut coeffs: Vec<T> = Vec::new();
        let mut weight_sum = 0.0f64;
        let mut k = 0usize;
        let tail_bound;
        loop {
            let c = coefficient(k);
            let w = c * dim_harmonic(k, d)? as f64 / omega;
            coeffs.push(T::of(c));
            weight_sum += w;
            // deep in the superexponential decay successive weight ratios
            // fall below 1/2, so twice the next term bounds the tail
            if k >= 4 && w < weight_sum * 1e-18 {
                tail_bound = T::of(2.0 * w);
                break;
            }
            k += 1;
            if k > 4096 {
                return Err(KernelError::WidthTooNarrow { tau, arg });
            }
        }
        let truncation = coeffs.len() - 1;
        let mut kernel = Self {
            d,
            family: KernelFamily::GaussianSeries { tau },
            truncation,
            tail_bound,
            coeffs,
            series_weights: Vec::new(),
            projection_cache: Arc::new(Mutex::new(BTreeMap::new())),
        };
        kernel.finish_series()?;
        Ok(kernel)
    }

    /// Chordal Gaussian `exp(-|x - x'|^2 / (2 sigma^2))`.
    pub fn gaussian_chordal(d: usize, sigma: f64) -> Result<Self, KernelError> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(KernelError::BadWidth(sigma));
        }
        Ok(Self::closed_form(d, KernelFamily::GaussianChordal { sigma }))
    }

    /// Compactly supported Wendland kernel `(1-u)_+^8 (32u^3 + 25u^2 + 8u + 1)`
    /// in the chordal distance `u`.
    pub fn wendland(d: usize) -> Result<Self, KernelError> {
        Ok(Self::closed_form(d, KernelFamily::Wendland))
    }

    /// Band-limited kernel from an explicit positive coefficient list.
    pub fn from_coefficients(d: usize, coeffs: Vec<T>) -> Result<Self, KernelError> {
        assert!(!coeffs.is_empty(), "coefficient list must be nonempty");
        let truncation = coeffs.len() - 1;
        let mut kernel = Self {
            d,
            family: KernelFamily::Custom,
            truncation,
            tail_bound: T::zero(),
            coeffs,
            series_weights: Vec::new(),
            projection_cache: Arc::new(Mutex::new(BTreeMap::new())),
        };
        kernel.finish_series()?;
        Ok(kernel)
    }

    fn closed_form(d: usize, family: KernelFamily) -> Self {
        Self {
            d,
            family,
            truncation: 0,
            tail_bound: T::zero(),
            coeffs: Vec::new(),
            series_weights: Vec::new(),
            projection_cache: Arc::new(Mutex::new(BTreeMap::new())),
        }
    }

    /// Validates positivity and precomputes the Legendre weights.
    fn finish_series(&mut self) -> Result<(), KernelError> {
        let omega = surface_area::<T>(self.d);
        let mut weights = Vec::with_capacity(self.coeffs.len());
        for (k, &c) in self.coeffs.iter().enumerate() {
            if !(c > T::zero()) || !c.is_finite() {
                return Err(KernelError::NonPositiveCoefficient {
                    k,
                    value: c.to_f64().unwrap_or(f64::NAN),
                });
            }
            if k >= 1 && c >= T::one() {
                log::warn!(
                    "{} kernel coefficient phi_hat_{k} = {c} is not below 1; the decay hypotheses of the approximation theory assume 0 < phi_hat_k < 1",
                    self.family.name()
                );
            }
            weights.push(c * T::of(dim_harmonic(k, self.d)? as f64) / omega);
        }
        self.series_weights = weights;
        Ok(())
    }

    pub fn ambient(&self) -> usize {
        self.d
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// Recorded analytic bound on the truncated series tail
    /// `sum_{k > K} phi_hat_k d_k / Omega_d`.
    pub fn tail_bound(&self) -> T {
        self.tail_bound
    }

    pub fn spec(&self) -> KernelSpec {
        let mut spec =
            KernelSpec { family: self.family.name().into(), gamma: None, tau: None, sigma: None };
        match self.family {
            KernelFamily::Sobolev { gamma } => spec.gamma = Some(gamma),
            KernelFamily::GaussianSeries { tau } => spec.tau = Some(tau),
            KernelFamily::GaussianChordal { sigma } => spec.sigma = Some(sigma),
            KernelFamily::Wendland | KernelFamily::Custom => {}
        }
        spec
    }

    /// `phi_hat_k`. Series families extend past the stored truncation by
    /// formula; closed-form families project numerically (256-node Gauss
    /// rule with the Gegenbauer weight) and cache the result.
    pub fn coefficient(&self, k: usize) -> Result<T, KernelError> {
        if k < self.coeffs.len() {
            return Ok(self.coeffs[k]);
        }
        match self.family {
            KernelFamily::Sobolev { gamma } => Ok(T::of(sobolev_coefficient(k, self.d, gamma))),
            KernelFamily::GaussianSeries { tau } => {
                let arg = 2.0 / (tau * tau);
                let ln_front =
                    -arg + (self.d as f64 - 1.0) * tau.ln() + special::ln_gamma(self.d as f64 / 2.0);
                let nu = k as f64 + (self.d as f64 - 1.0) / 2.0;
                Ok(T::of((ln_front + special::ln_bessel_i(nu, arg)).exp()))
            }
            KernelFamily::Custom => Ok(T::zero()),
            KernelFamily::GaussianChordal { .. } | KernelFamily::Wendland => {
                let mut cache = self.projection_cache.lock().expect("projection cache poisoned");
                if let Some(&v) = cache.get(&k) {
                    return Ok(v);
                }
                let v = self.project_coefficient(k);
                cache.insert(k, v);
                Ok(v)
            }
        }
    }

    /// `phi_hat_k = Omega_{d-1} int_{-1}^{1} P_k(t) phi(t) (1-t^2)^{(d-2)/2} dt`.
    fn project_coefficient(&self, k: usize) -> T {
        let alpha = (self.d as f64 - 2.0) / 2.0;
        let (nodes, weights) = special::gauss_gegenbauer::<T>(256, alpha);
        let omega_dm1 = surface_area::<T>(self.d - 1);
        let mut acc = T::zero();
        for (&t, &w) in nodes.iter().zip(&weights) {
            let pk = crate::harmonics::legendre(k, self.d, t);
            acc = acc + w * pk * self.eval(t);
        }
        acc * omega_dm1
    }

    /// Kernel value at `t = x . x' in [-1, 1]`.
    pub fn eval(&self, t: T) -> T {
        let t = t.clamp(-T::one(), T::one());
        match self.family {
            KernelFamily::GaussianChordal { sigma } => {
                let s2 = T::of(2.0 * sigma * sigma);
                ((t - T::one()) * T::of(2.0) / s2).exp()
            }
            KernelFamily::Wendland => {
                let u = ((T::one() - t) * T::of(2.0)).max(T::zero()).sqrt();
                wendland_profile(u)
            }
            _ => {
                let p = legendre_seq(self.truncation, self.d, t);
                p.iter().zip(&self.series_weights).map(|(&pk, &w)| pk * w).sum()
            }
        }
    }

    /// Batch evaluation; series kernels run a lane-blocked recurrence.
    pub fn eval_batch(&self, ts: &[T]) -> Vec<T> {
        match self.family {
            KernelFamily::GaussianChordal { .. } | KernelFamily::Wendland => {
                ts.iter().map(|&t| self.eval(t)).collect()
            }
            _ => {
                let mut out = vec![T::zero(); ts.len()];
                series_eval_block(&self.series_weights, self.d, ts, &mut out);
                out
            }
        }
    }

    /// Symmetric kernel matrix `(phi(x_i . x_j))_{ij}`.
    ///
    /// Each unordered pair is evaluated once; the diagonal is set to
    /// `eval(1)` exactly, so the result is exactly symmetric.
    pub fn gram(&self, pts: &PointSet<T>) -> Result<Matrix<T>, KernelError> {
        if pts.dim() != self.d {
            return Err(KernelError::DimensionMismatch { expected: self.d, got: pts.dim() });
        }
        let n = pts.len();
        let points = pts.points();
        let rows: Vec<(usize, Vec<T>)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let ts: Vec<T> = (i + 1..n).map(|j| points[i].dot(&points[j])).collect();
                (i, self.eval_batch(&ts))
            })
            .collect();
        let diag = self.eval(T::one());
        let mut m = Matrix::zeros(n, n);
        for (i, vals) in rows {
            m[(i, i)] = diag;
            for (off, v) in vals.into_iter().enumerate() {
                let j = i + 1 + off;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(m)
    }

    /// Rectangular kernel matrix `(phi(r_i . c_j))_{ij}`.
    pub fn cross_gram(
        &self,
        rows: &PointSet<T>,
        cols: &PointSet<T>,
    ) -> Result<Matrix<T>, KernelError> {
        if rows.dim() != self.d || cols.dim() != self.d {
            return Err(KernelError::DimensionMismatch {
                expected: self.d,
                got: if rows.dim() != self.d { rows.dim() } else { cols.dim() },
            });
        }
        let (nr, nc) = (rows.len(), cols.len());
        let row_vals: Vec<Vec<T>> = (0..nr)
            .into_par_iter()
            .map(|i| {
                let ts: Vec<T> =
                    (0..nc).map(|j| rows.point(i).dot(cols.point(j))).collect();
                self.eval_batch(&ts)
            })
            .collect();
        let mut m = Matrix::zeros(nr, nc);
        for (i, vals) in row_vals.into_iter().enumerate() {
            for (j, v) in vals.into_iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }
}

/// `(1 - u)_+^8 (32 u^3 + 25 u^2 + 8 u + 1)`.
pub fn wendland_profile<T: Real>(u: T) -> T {
    if u >= T::one() {
        return T::zero();
    }
    let base = T::one() - u;
    let b2 = base * base;
    let b4 = b2 * b2;
    let b8 = b4 * b4;
    let poly = ((T::of(32.0) * u + T::of(25.0)) * u + T::of(8.0)) * u + T::one();
    b8 * poly
}

fn sobolev_coefficient(k: usize, d: usize, gamma: f64) -> f64 {
    let kf = k as f64;
    (kf * (kf + d as f64 - 1.0) + 1.0).powf(-gamma)
}

/// Integral-comparison bound on `sum_{k > K} phi_hat_k d_k / Omega_d` for
/// the Sobolev family: `2 d^{d-1} K^{d-2gamma} / ((d-1)! Omega_d (2gamma - d))`.
fn sobolev_tail_bound(truncation: usize, d: usize, gamma: f64) -> f64 {
    let omega = surface_area::<f64>(d);
    let factorial: f64 = (1..d).map(|i| i as f64).product();
    2.0 * (d as f64).powi(d as i32 - 1) * (truncation as f64).powf(d as f64 - 2.0 * gamma)
        / (factorial * omega * (2.0 * gamma - d as f64))
}

fn sobolev_truncation(d: usize, gamma: f64) -> usize {
    let omega = surface_area::<f64>(d);
    let factorial: f64 = (1..d).map(|i| i as f64).product();
    let constant = 2.0 * (d as f64).powi(d as i32 - 1) / (factorial * omega * (2.0 * gamma - d as f64));
    let needed = (constant / TAIL_TOLERANCE).powf(1.0 / (2.0 * gamma - d as f64)).ceil();
    (needed as usize).clamp(8, MAX_TRUNCATION)
}

/// Lane-blocked evaluation of `sum_k w_k P_k^{d+1}(t)` over many arguments.
fn series_eval_block<T: Real>(weights: &[T], d: usize, ts: &[T], out: &mut [T]) {
    const LANES: usize = 8;
    let kmax = weights.len() - 1;
    for (chunk, acc_chunk) in ts.chunks(LANES).zip(out.chunks_mut(LANES)) {
        let mut t = [T::zero(); LANES];
        let mut prev = [T::one(); LANES];
        let mut cur = [T::zero(); LANES];
        let mut acc = [T::zero(); LANES];
        let len = chunk.len();
        for l in 0..len {
            t[l] = chunk[l].clamp(-T::one(), T::one());
            cur[l] = t[l];
            acc[l] = weights[0];
        }
        if kmax >= 1 {
            for l in 0..len {
                acc[l] = acc[l] + weights[1] * cur[l];
            }
        }
        for k in 1..kmax {
            let inv = T::one() / T::of((k + d - 1) as f64);
            let a = T::of((2 * k + d - 1) as f64) * inv;
            let b = T::of(k as f64) * inv;
            let w = weights[k + 1];
            for l in 0..LANES {
                let next = a * t[l] * cur[l] - b * prev[l];
                prev[l] = cur[l];
                cur[l] = next;
                acc[l] = acc[l] + w * next;
            }
        }
        acc_chunk.copy_from_slice(&acc[..len]);
    }
}

/// Interpolation-norm choice: `psi_hat_k = phi_hat_k^r` with
/// `r = 0` the `L^2` norm and `r = 1` the native-space norm.
#[derive(Debug, Clone)]
pub struct NormSpec<T> {
    r: T,
    base: Kernel<T>,
}

impl<T: Real> NormSpec<T> {
    pub fn new(base: Kernel<T>, r: T) -> Result<Self, KernelError> {
        if r < T::zero() || r > T::one() {
            return Err(KernelError::BadExponent(r.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(Self { r, base })
    }

    pub fn r(&self) -> T {
        self.r
    }

    pub fn base(&self) -> &Kernel<T> {
        &self.base
    }

    /// `||f - g||_psi = (sum_k psi_hat_k^{-1} sum_l |f_hat - g_hat|^2)^{1/2}`.
    pub fn distance(&self, f: &BandLimited<T>, g: &BandLimited<T>) -> Result<T, KernelError> {
        psi_norm(f, g, &self.base, self.r)
    }
}

/// Distance between band-limited functions in the `psi`-norm induced by
/// `psi_hat_k = phi_hat_k^r`.
pub fn psi_norm<T: Real>(
    f: &BandLimited<T>,
    g: &BandLimited<T>,
    base: &Kernel<T>,
    r: T,
) -> Result<T, KernelError> {
    if r < T::zero() || r > T::one() {
        return Err(KernelError::BadExponent(r.to_f64().unwrap_or(f64::NAN)));
    }
    if f.ambient() != g.ambient() {
        return Err(KernelError::OperandMismatch(f.ambient(), g.ambient()));
    }
    if f.ambient() != base.ambient() {
        return Err(KernelError::DimensionMismatch { expected: base.ambient(), got: f.ambient() });
    }

    // merge the two sparse coefficient maps
    let mut diffs: BTreeMap<(usize, usize), T> = BTreeMap::new();
    for (idx, &v) in f.coefficients() {
        diffs.insert((idx.degree, idx.order), v);
    }
    for (idx, &v) in g.coefficients() {
        *diffs.entry((idx.degree, idx.order)).or_insert(T::zero()) -= v;
    }

    let mut acc = T::zero();
    let mut inv_cache: BTreeMap<usize, T> = BTreeMap::new();
    for ((k, _), diff) in diffs {
        if diff == T::zero() {
            continue;
        }
        let inv = match inv_cache.get(&k) {
            Some(&v) => v,
            None => {
                let psi = if r == T::zero() { T::one() } else { base.coefficient(k)?.powf(r) };
                if psi < T::min_positive_value() || !psi.is_finite() {
                    return Err(KernelError::PsiUnderflow { degree: k });
                }
                let inv = T::one() / psi;
                inv_cache.insert(k, inv);
                inv
            }
        };
        acc = acc + diff * diff * inv;
    }
    Ok(acc.sqrt())
}
