//! Constructive positive quadrature rules on scattered spherical nodes.
//!
//! A rule of degree `s` integrates every spherical polynomial of degree at
//! most `s` exactly with nonnegative node weights. Construction solves the
//! real-harmonic moment system `sum_i w_i Y_{k,l}(x_i) = sqrt(4 pi)
//! delta_{k,0} delta_{l,1}`:
//!
//! 1. a least-norm correction of the uniform weights (the minimum-distance
//!    point of the affine solution set), accepted only when it lands in the
//!    nonnegative orthant, and otherwise
//! 2. nonnegative least squares (Lawson-Hanson active set) on the
//!    column-equilibrated system, whose residual certifies failure.
//!
//! All moments are normalized by `sqrt(4 pi)` before residual thresholding,
//! so tolerances are scale-free.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, PointSet, SpherePoint};
use crate::harmonics::{eval_real_sph_harmonics, BandLimited, HarmonicsError};
use crate::kernels::KernelError;
use crate::linalg::{dot, norm2, Cholesky, Matrix};
use crate::scalar::{surface_area, Real};

/// Normalized residual ceiling for a successful construction.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum QuadratureError {
    #[error("no positive quadrature rule found: normalized residual {residual:.3e} exceeds {tolerance:.1e} (degree too large for this node set)")]
    NoPositiveRule { residual: f64, tolerance: f64 },
    #[error("a positive rule of degree {degree} needs at least {needed} nodes, got {got}")]
    TooFewNodes { degree: usize, needed: usize, got: usize },
    #[error("quadrature construction is implemented for S^2 only, got d = {0}")]
    UnsupportedDimension(usize),
    #[error("Marcinkiewicz-Zygmund ratio of the zero polynomial is undefined")]
    ZeroPolynomial,
    #[error("weights file I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("rule sidecar {0} is missing or unreadable")]
    SidecarMissing(PathBuf),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Harmonics(#[from] HarmonicsError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Positive quadrature rule: nodes, nonnegative weights in units of
/// surface measure, design degree, and the construction residual.
#[derive(Debug, Clone)]
pub struct QuadratureRule<T> {
    nodes: PointSet<T>,
    weights: Vec<T>,
    degree: usize,
    residual: T,
    c1_observed: T,
}

/// Sidecar metadata stored next to a rule CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleMetadata {
    pub degree: usize,
    pub residual: f64,
    pub c1_observed: f64,
}

impl<T: Real> QuadratureRule<T> {
    /// Equal weights `Omega_d / n`; exact on constants (degree 0) for any
    /// node set and exact to the design degree for spherical designs.
    pub fn uniform(nodes: PointSet<T>) -> Self {
        let n = nodes.len();
        let omega = surface_area::<T>(nodes.dim());
        let w = omega / T::of_usize(n);
        let residual = (w * T::of_usize(n) / omega - T::one()).abs();
        Self {
            nodes,
            weights: vec![w; n],
            degree: 0,
            residual,
            c1_observed: T::one(),
        }
    }

    /// Rule from externally supplied weights (file ingestion path).
    pub fn from_parts(
        nodes: PointSet<T>,
        weights: Vec<T>,
        degree: usize,
        residual: T,
    ) -> Self {
        assert_eq!(nodes.len(), weights.len(), "node/weight length mismatch");
        let c1 = observed_c1(&nodes, &weights);
        Self { nodes, weights, degree, residual, c1_observed: c1 }
    }

    pub fn nodes(&self) -> &PointSet<T> {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Normalized construction residual.
    pub fn residual(&self) -> T {
        self.residual
    }

    /// Observed weight-bound constant `max_i w_i * n / Omega_d`.
    pub fn c1_observed(&self) -> T {
        self.c1_observed
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn metadata(&self) -> RuleMetadata {
        RuleMetadata {
            degree: self.degree,
            residual: self.residual.to_f64().unwrap_or(f64::NAN),
            c1_observed: self.c1_observed.to_f64().unwrap_or(f64::NAN),
        }
    }

    /// Writes `x0,x1,x2,w` CSV plus a JSON sidecar at the same path with
    /// extension `json`.
    pub fn save(&self, path: &Path) -> Result<(), QuadratureError> {
        let mut out = BufWriter::new(File::create(path)?);
        let d = self.nodes.dim();
        let header: Vec<String> = (0..=d).map(|i| format!("x{i}")).collect();
        writeln!(out, "{},w", header.join(","))?;
        for (p, w) in self.nodes.points().iter().zip(&self.weights) {
            let row: Vec<String> = p.coords().iter().map(|c| format!("{c}")).collect();
            writeln!(out, "{},{w}", row.join(","))?;
        }
        out.flush()?;
        let sidecar = path.with_extension("json");
        let meta = serde_json::to_string_pretty(&self.metadata()).expect("metadata serializes");
        std::fs::write(sidecar, meta)?;
        Ok(())
    }

    /// Loads a rule written by [`QuadratureRule::save`].
    pub fn load(path: &Path) -> Result<Self, QuadratureError> {
        let file = File::open(path)?;
        let reader = BufReader::new(file);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or(QuadratureError::Parse { line: 1, reason: "empty file".into() })??;
        let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
        if cols.len() < 3 || cols.last() != Some(&"w") {
            return Err(QuadratureError::Parse {
                line: 1,
                reason: format!("expected header x0,...,xd,w, got '{header}'"),
            });
        }
        let width = cols.len();
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line_no = idx + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').map(str::trim).collect();
            if fields.len() != width {
                return Err(QuadratureError::Parse {
                    line: line_no,
                    reason: format!("expected {width} fields, got {}", fields.len()),
                });
            }
            let mut vals = Vec::with_capacity(width);
            for f in &fields {
                vals.push(f.parse::<f64>().map_err(|e| QuadratureError::Parse {
                    line: line_no,
                    reason: format!("bad float '{f}': {e}"),
                })?);
            }
            let w = vals.pop().expect("width >= 3");
            if w < 0.0 {
                return Err(QuadratureError::Parse {
                    line: line_no,
                    reason: format!("negative weight {w}"),
                });
            }
            weights.push(T::of(w));
            points.push(SpherePoint::new(vals.into_iter().map(T::of).collect()).map_err(|e| {
                QuadratureError::Parse { line: line_no, reason: format!("bad node: {e}") }
            })?);
        }
        let nodes = PointSet::new(points, None)?;
        let sidecar = path.with_extension("json");
        let meta: RuleMetadata = std::fs::read_to_string(&sidecar)
            .ok()
            .and_then(|s| serde_json::from_str(&s).ok())
            .ok_or(QuadratureError::SidecarMissing(sidecar))?;
        Ok(Self::from_parts(nodes, weights, meta.degree, T::of(meta.residual)))
    }
}

fn observed_c1<T: Real>(nodes: &PointSet<T>, weights: &[T]) -> T {
    let max_w = weights.iter().fold(T::zero(), |a, &b| a.max(b));
    max_w * T::of_usize(weights.len()) / surface_area::<T>(nodes.dim())
}

/// Largest design degree attempted by default: `(s+1)^2 <= n/2` keeps the
/// moment system comfortably underdetermined.
pub fn default_degree(n: usize) -> usize {
    let mut s = 0usize;
    while (s + 2) * (s + 2) <= n / 2 {
        s += 1;
    }
    s
}

/// Fewest nodes any positive rule of degree `s` on `S^2` can have
/// (Delsarte-Goethals-Seidel): `(e+1)^2` for `s = 2e`, `(e+1)(e+2)` for
/// `s = 2e+1`. Symmetric designs get close to this, with roughly half as
/// many nodes as moment conditions.
pub fn minimum_node_count(s: usize) -> usize {
    let e = s / 2;
    if s % 2 == 0 {
        (e + 1) * (e + 1)
    } else {
        (e + 1) * (e + 2)
    }
}

/// Builds a positive quadrature rule of degree `s` on the given nodes.
pub fn build_quadrature<T: Real>(
    pts: &PointSet<T>,
    s: usize,
) -> Result<QuadratureRule<T>, QuadratureError> {
    if pts.dim() != 2 {
        return Err(QuadratureError::UnsupportedDimension(pts.dim()));
    }
    let n = pts.len();
    let moments = (s + 1) * (s + 1);
    let needed = minimum_node_count(s);
    if n < needed {
        return Err(QuadratureError::TooFewNodes { degree: s, needed, got: n });
    }

    // Normalized moment matrix: column i holds Y(x_i) / sqrt(4 pi).
    let inv_norm = T::one() / surface_area::<T>(2).sqrt();
    let columns: Vec<Vec<T>> = pts
        .points()
        .par_iter()
        .map(|p| {
            eval_real_sph_harmonics(p, s)
                .expect("d = 2 checked above")
                .into_iter()
                .map(|y| y * inv_norm)
                .collect()
        })
        .collect();
    let mut a = Matrix::zeros(moments, n);
    for (j, col) in columns.iter().enumerate() {
        a.col_mut(j).copy_from_slice(col);
    }
    let mut b = vec![T::zero(); moments];
    b[0] = T::one();

    let omega = surface_area::<T>(2);
    let uniform = omega / T::of_usize(n);

    // Phase 1: minimum-distance-from-uniform solution of the consistent
    // moment system. Accepted only if it is nonnegative outright.
    if let Some(w) = least_norm_correction(&a, &b, uniform) {
        if w.iter().all(|&v| v >= T::zero()) {
            let residual = moment_residual(&a, &b, &w);
            if residual.to_f64().unwrap_or(f64::INFINITY) < RESIDUAL_TOLERANCE {
                return Ok(finish_rule(pts, w, s, residual));
            }
        }
    }

    // Phase 2: Lawson-Hanson NNLS on the column-equilibrated system.
    let scales: Vec<T> = (0..n)
        .map(|j| {
            let nrm = norm2(a.col(j));
            if nrm > T::zero() {
                nrm
            } else {
                T::one()
            }
        })
        .collect();
    let mut eq = a.clone();
    for (j, &sc) in scales.iter().enumerate() {
        for v in eq.col_mut(j) {
            *v /= sc;
        }
    }
    let out = crate::linalg::nnls(&eq, &b);
    let w: Vec<T> = out.x.iter().zip(&scales).map(|(&v, &sc)| v / sc).collect();
    let residual = moment_residual(&a, &b, &w);
    if residual.to_f64().unwrap_or(f64::INFINITY) < RESIDUAL_TOLERANCE {
        Ok(finish_rule(pts, w, s, residual))
    } else {
        Err(QuadratureError::NoPositiveRule {
            residual: residual.to_f64().unwrap_or(f64::INFINITY),
            tolerance: RESIDUAL_TOLERANCE,
        })
    }
}

fn finish_rule<T: Real>(
    pts: &PointSet<T>,
    weights: Vec<T>,
    degree: usize,
    residual: T,
) -> QuadratureRule<T> {
    let c1 = observed_c1(pts, &weights);
    log::debug!(
        "quadrature degree {degree} on {} nodes: residual {residual:.3e}, c1 {c1:.3}",
        pts.len()
    );
    QuadratureRule {
        nodes: pts.clone(),
        weights,
        degree,
        residual,
        c1_observed: c1,
    }
}

/// `w = u + A^T (A A^T)^{-1} (b - A u)` for underdetermined systems, or the
/// plain normal-equation least-squares solution when `m >= n`.
fn least_norm_correction<T: Real>(a: &Matrix<T>, b: &[T], uniform: T) -> Option<Vec<T>> {
    let (m, n) = (a.nrows(), a.ncols());
    if m < n {
        let u = vec![uniform; n];
        let au = a.matvec(&u);
        let rhs: Vec<T> = b.iter().zip(&au).map(|(&bi, &ai)| bi - ai).collect();
        // Gram of the rows: (A A^T)[i][j] = sum_cols a[i, c] a[j, c]
        let cols: Vec<&[T]> = (0..n).map(|j| a.col(j)).collect();
        let mut gram = Matrix::zeros(m, m);
        let entries: Vec<Vec<T>> = (0..m)
            .into_par_iter()
            .map(|i| {
                (0..=i)
                    .map(|j| cols.iter().map(|c| c[i] * c[j]).sum())
                    .collect()
            })
            .collect();
        for (i, row) in entries.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
        let z = Cholesky::factor(gram).ok()?.solve(&rhs);
        Some((0..n).map(|j| uniform + dot(a.col(j), &z)).collect())
    } else {
        // unique (if full-rank) least-squares solution of the tall system
        let mut gram = Matrix::zeros(n, n);
        let entries: Vec<Vec<T>> = (0..n)
            .into_par_iter()
            .map(|j| (0..=j).map(|i| dot(a.col(i), a.col(j))).collect())
            .collect();
        for (j, col) in entries.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
        let rhs = a.tr_matvec(b);
        Some(Cholesky::factor(gram).ok()?.solve(&rhs))
    }
}

fn moment_residual<T: Real>(a: &Matrix<T>, b: &[T], w: &[T]) -> T {
    let aw = a.matvec(w);
    let diff: Vec<T> = aw.iter().zip(b).map(|(&x, &y)| x - y).collect();
    norm2(&diff)
}

/// Maximum absolute normalized moment defect of `rule` over all harmonics
/// of degree at most `s_check`:
/// `max |sum_i w_i Y_{k,l}(x_i) - sqrt(4 pi) delta| / sqrt(4 pi)`.
pub fn verify_exactness<T: Real>(
    rule: &QuadratureRule<T>,
    s_check: usize,
) -> Result<T, QuadratureError> {
    if rule.nodes.dim() != 2 {
        return Err(QuadratureError::UnsupportedDimension(rule.nodes.dim()));
    }
    let sqrt_omega = surface_area::<T>(2).sqrt();
    let moments = (s_check + 1) * (s_check + 1);
    let sums: Vec<T> = rule
        .nodes
        .points()
        .par_iter()
        .zip(rule.weights.par_iter())
        .fold(
            || vec![T::zero(); moments],
            |mut acc, (p, &w)| {
                let y = eval_real_sph_harmonics(p, s_check).expect("d = 2 checked");
                for (a, v) in acc.iter_mut().zip(y) {
                    *a += w * v;
                }
                acc
            },
        )
        .reduce(
            || vec![T::zero(); moments],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let mut worst = T::zero();
    for (idx, &m) in sums.iter().enumerate() {
        let target = if idx == 0 { sqrt_omega } else { T::zero() };
        worst = worst.max((m - target).abs());
    }
    Ok(worst / sqrt_omega)
}

/// Marcinkiewicz-Zygmund diagnostic for a band-limited polynomial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MzDiagnostics<T> {
    /// `sum_i w_i p(x_i)^2`.
    pub discrete_norm_sq: T,
    /// `||p||_{L^2}^2` by Parseval.
    pub continuous_norm_sq: T,
    /// Their quotient; exactly 1 when `p^2` lies inside the design degree.
    pub ratio: T,
}

pub fn mz_ratio<T: Real>(
    rule: &QuadratureRule<T>,
    p: &BandLimited<T>,
) -> Result<MzDiagnostics<T>, QuadratureError> {
    if p.is_zero() {
        return Err(QuadratureError::ZeroPolynomial);
    }
    let discrete: T = rule
        .nodes
        .points()
        .par_iter()
        .zip(rule.weights.par_iter())
        .map(|(x, &w)| {
            let v = p.eval(x).expect("band-limited eval on S^2");
            w * v * v
        })
        .collect::<Vec<T>>()
        .into_iter()
        .sum();
    let continuous = p.l2_norm_sq();
    Ok(MzDiagnostics {
        discrete_norm_sq: discrete,
        continuous_norm_sq: continuous,
        ratio: discrete / continuous,
    })
}

#[cfg(test)]
mod tests;
