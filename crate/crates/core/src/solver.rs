//! Weighted regularized least squares on a single server.
//!
//! The fit minimizes `sum_i w_i (f(x_i) - y_i)^2 + lambda ||f||_phi^2` over
//! the kernel's native space; the minimizer is a kernel expansion anchored
//! at the data sites. The linear-algebra route solves the symmetrized
//! system `(W^{1/2} Phi W^{1/2} + lambda I) b = W^{1/2} y` with
//! `a = W^{1/2} b`, which is equivalent to the unsymmetric closed form
//! `(W Phi + lambda I) a = W y` for positive diagonal `W`; zero-weight
//! nodes receive zero coefficients and leave the system.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{GeometryError, PointSet, SpherePoint};
use crate::kernels::{Kernel, KernelError, KernelSpec};
use crate::linalg::{dot, Cholesky, LinalgError, Matrix};
use crate::quadrature::QuadratureRule;
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("inputs and outputs differ in length: {inputs} vs {outputs}")]
    LengthMismatch { inputs: usize, outputs: usize },
    #[error("output {index} is not finite")]
    NonFiniteOutput { index: usize },
    #[error("quadrature nodes do not match the data sites (index {index})")]
    NodeMismatch { index: usize },
    #[error("linear solve produced non-finite coefficients")]
    SolveFailure,
    #[error("regularization parameter must be positive and finite, got {0}")]
    BadLambda(f64),
    #[error("smoothness must satisfy gamma > d/2, got gamma = {gamma}, d = {d}")]
    BadGamma { gamma: f64, d: usize },
    #[error("lambda rescaling needs 0 < lambda < 1, got {0}")]
    RescaleLambdaRange(f64),
    #[error("lambda rescaling needs n_local >= 2 and n_total >= n_local, got n_local = {n_local}, n_total = {n_total}")]
    RescaleCounts { n_local: usize, n_total: usize },
    #[error("grid search needs nonempty kernel and lambda grids")]
    EmptyGrid,
    #[error("holdout point {index} coincides with a training site")]
    HoldoutNotDisjoint { index: usize },
    #[error("estimator and point dimensions differ: {expected} vs {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("failed to read labeled data: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Input sites with their observed outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData<T> {
    inputs: PointSet<T>,
    outputs: Vec<T>,
}

impl<T: Real> LabeledData<T> {
    pub fn new(inputs: PointSet<T>, outputs: Vec<T>) -> Result<Self, SolverError> {
        if inputs.len() != outputs.len() {
            return Err(SolverError::LengthMismatch {
                inputs: inputs.len(),
                outputs: outputs.len(),
            });
        }
        if let Some(index) = outputs.iter().position(|v| !v.is_finite()) {
            return Err(SolverError::NonFiniteOutput { index });
        }
        Ok(Self { inputs, outputs })
    }

    pub fn inputs(&self) -> &PointSet<T> {
        &self.inputs
    }

    pub fn outputs(&self) -> &[T] {
        &self.outputs
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    /// Rows at `indices`, preserving order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            inputs: self.inputs.subset(indices),
            outputs: indices.iter().map(|&i| self.outputs[i]).collect(),
        }
    }

    /// CSV with header `x0,...,xd,y`.
    pub fn save_csv(&self, path: &Path) -> Result<(), SolverError> {
        let mut out = BufWriter::new(File::create(path)?);
        let d = self.inputs.dim();
        let header: Vec<String> = (0..=d).map(|i| format!("x{i}")).collect();
        writeln!(out, "{},y", header.join(","))?;
        for (p, y) in self.inputs.points().iter().zip(&self.outputs) {
            let row: Vec<String> = p.coords().iter().map(|c| format!("{c}")).collect();
            writeln!(out, "{},{y}", row.join(","))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load_csv(path: &Path, lenient: bool) -> Result<Self, SolverError> {
        let reader = BufReader::new(File::open(path)?);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or(SolverError::Parse { line: 1, reason: "empty file".into() })??;
        let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
        let ok_header = cols.len() >= 3
            && cols.last() == Some(&"y")
            && cols[..cols.len() - 1].iter().enumerate().all(|(i, c)| *c == format!("x{i}"));
        if !ok_header {
            return Err(SolverError::Parse {
                line: 1,
                reason: format!("expected header x0,...,xd,y, got '{header}'"),
            });
        }
        let width = cols.len();
        let mut points = Vec::new();
        let mut outputs = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line_no = idx + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').map(str::trim).collect();
            if fields.len() != width {
                return Err(SolverError::Parse {
                    line: line_no,
                    reason: format!("expected {width} fields, got {}", fields.len()),
                });
            }
            let mut vals = Vec::with_capacity(width);
            for f in &fields {
                vals.push(f.parse::<f64>().map_err(|e| SolverError::Parse {
                    line: line_no,
                    reason: format!("bad float '{f}': {e}"),
                })?);
            }
            let y = vals.pop().expect("width >= 3");
            let norm: f64 = vals.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !lenient && (norm - 1.0).abs() > 1e-6 {
                return Err(SolverError::Parse {
                    line: line_no,
                    reason: format!("input norm {norm} deviates from 1 by more than 1e-6"),
                });
            }
            points.push(SpherePoint::new(vals.into_iter().map(T::of).collect()).map_err(
                |e| SolverError::Parse { line: line_no, reason: format!("bad input: {e}") },
            )?);
            outputs.push(T::of(y));
        }
        Self::new(PointSet::new(points, None)?, outputs)
    }
}

/// Fit hyperparameters for one server.
#[derive(Debug, Clone)]
pub struct FitConfig<T> {
    pub lambda: T,
    pub quad_degree: usize,
    pub kernel: Kernel<T>,
}

impl<T: Real> FitConfig<T> {
    pub fn new(lambda: T, quad_degree: usize, kernel: Kernel<T>) -> Result<Self, SolverError> {
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(SolverError::BadLambda(lambda.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(Self { lambda, quad_degree, kernel })
    }
}

/// Kernel-expansion estimator anchored at a server's data sites.
///
/// Carries only centers, expansion coefficients, and the kernel tag; no
/// outputs and no quadrature weights ever leave the server.
#[derive(Debug, Clone)]
pub struct LocalEstimator<T> {
    centers: PointSet<T>,
    coeffs: Vec<T>,
    kernel: Kernel<T>,
    sample_count: usize,
}

impl<T: Real> LocalEstimator<T> {
    pub fn new(centers: PointSet<T>, coeffs: Vec<T>, kernel: Kernel<T>, sample_count: usize) -> Self {
        assert_eq!(centers.len(), coeffs.len(), "centers/coefficients length mismatch");
        assert!(sample_count >= 1, "estimator needs at least one sample");
        Self { centers, coeffs, kernel, sample_count }
    }

    pub fn centers(&self) -> &PointSet<T> {
        &self.centers
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn kernel(&self) -> &Kernel<T> {
        &self.kernel
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    /// `f(x) = sum_i a_i phi(x . c_i)`.
    pub fn evaluate(&self, x: &SpherePoint<T>) -> Result<T, SolverError> {
        if x.dim() != self.centers.dim() {
            return Err(SolverError::DimensionMismatch {
                expected: self.centers.dim(),
                got: x.dim(),
            });
        }
        let ts: Vec<T> = self.centers.points().iter().map(|c| c.dot(x)).collect();
        let vals = self.kernel.eval_batch(&ts);
        Ok(dot(&vals, &self.coeffs))
    }

    /// Evaluation over many points, parallelized.
    pub fn evaluate_batch(&self, pts: &[SpherePoint<T>]) -> Result<Vec<T>, SolverError> {
        if let Some(bad) = pts.iter().find(|p| p.dim() != self.centers.dim()) {
            return Err(SolverError::DimensionMismatch {
                expected: self.centers.dim(),
                got: bad.dim(),
            });
        }
        let centers = self.centers.points();
        Ok(pts
            .par_iter()
            .map(|x| {
                let ts: Vec<T> = centers.iter().map(|c| c.dot(x)).collect();
                dot(&self.kernel.eval_batch(&ts), &self.coeffs)
            })
            .collect())
    }

    /// JSON object `{kernel_tag, sample_count, centers, coeffs}`.
    pub fn to_json(&self) -> serde_json::Value {
        let centers: Vec<Vec<f64>> = self
            .centers
            .points()
            .iter()
            .map(|p| p.coords().iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect())
            .collect();
        let coeffs: Vec<f64> =
            self.coeffs.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect();
        serde_json::json!({
            "kernel_tag": self.kernel.spec(),
            "sample_count": self.sample_count,
            "centers": centers,
            "coeffs": coeffs,
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, String> {
        let spec: KernelSpec = serde_json::from_value(value["kernel_tag"].clone())
            .map_err(|e| format!("bad kernel_tag: {e}"))?;
        let sample_count =
            value["sample_count"].as_u64().ok_or("missing sample_count")? as usize;
        let centers_json = value["centers"].as_array().ok_or("missing centers")?;
        let mut centers = Vec::with_capacity(centers_json.len());
        for row in centers_json {
            let coords: Vec<T> = row
                .as_array()
                .ok_or("center row must be an array")?
                .iter()
                .map(|v| v.as_f64().map(T::of).ok_or("bad center coordinate"))
                .collect::<Result<_, _>>()?;
            centers.push(SpherePoint::new(coords).map_err(|e| e.to_string())?);
        }
        let coeffs: Vec<T> = value["coeffs"]
            .as_array()
            .ok_or("missing coeffs")?
            .iter()
            .map(|v| v.as_f64().map(T::of).ok_or("bad coefficient"))
            .collect::<Result<_, _>>()?;
        if centers.is_empty() || centers.len() != coeffs.len() {
            return Err("centers/coeffs length mismatch".into());
        }
        let d = centers[0].dim();
        let kernel = spec.build::<T>(d).map_err(|e| e.to_string())?;
        let centers = PointSet::new(centers, None).map_err(|e| e.to_string())?;
        Ok(Self::new(centers, coeffs, kernel, sample_count))
    }
}

/// Weighted regularized least squares fit on one server.
///
/// `rule` must sit on exactly the data sites (same points, same order);
/// its weights enter the data-fit term and are never recomputed here, so
/// callers may substitute equal weights `Omega_d / n` for design node sets.
pub fn wrls_fit<T: Real>(
    data: &LabeledData<T>,
    rule: &QuadratureRule<T>,
    cfg: &FitConfig<T>,
) -> Result<LocalEstimator<T>, SolverError> {
    if !(cfg.lambda > T::zero()) || !cfg.lambda.is_finite() {
        return Err(SolverError::BadLambda(cfg.lambda.to_f64().unwrap_or(f64::NAN)));
    }
    let n = data.len();
    if rule.len() != n {
        return Err(SolverError::NodeMismatch { index: 0 });
    }
    let tol = T::geom_tol();
    for i in 0..n {
        if rule.nodes().point(i).chordal_distance(data.inputs.point(i)) > tol {
            return Err(SolverError::NodeMismatch { index: i });
        }
    }

    // Zero-weight nodes drop out of the objective; their coefficients are 0.
    let active: Vec<usize> =
        (0..n).filter(|&i| rule.weights()[i] > T::zero()).collect();
    let mut coeffs = vec![T::zero(); n];
    if !active.is_empty() {
        let sites = data.inputs.subset(&active);
        let phi = cfg.kernel.gram(&sites)?;
        let sqrt_w: Vec<T> = active.iter().map(|&i| rule.weights()[i].sqrt()).collect();
        let m = active.len();
        let mut b = Matrix::zeros(m, m);
        for j in 0..m {
            let col = phi.col(j);
            let bj = b.col_mut(j);
            for i in 0..m {
                bj[i] = sqrt_w[i] * col[i] * sqrt_w[j];
            }
            bj[j] += cfg.lambda;
        }
        let rhs: Vec<T> = active
            .iter()
            .zip(&sqrt_w)
            .map(|(&i, &sw)| sw * data.outputs[i])
            .collect();
        let solution = match Cholesky::factor(b.clone()) {
            Ok(ch) => ch.solve(&rhs),
            Err(err) => {
                log::warn!(
                    "symmetrized WRLS factorization failed ({err}); falling back to a least-squares solve"
                );
                crate::linalg::lstsq(&b, &rhs)?
            }
        };
        for ((&i, &sw), &bi) in active.iter().zip(&sqrt_w).zip(&solution) {
            coeffs[i] = sw * bi;
        }
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(SolverError::SolveFailure);
    }
    Ok(LocalEstimator::new(
        data.inputs.clone(),
        coeffs,
        cfg.kernel.clone(),
        n,
    ))
}

/// Theoretical regularization schedule `lambda = n^{-2 gamma / (2 gamma + d)}`
/// (proportionality constant 1).
pub fn theoretical_lambda<T: Real>(n: usize, gamma: f64, d: usize) -> Result<T, SolverError> {
    if !(gamma > d as f64 / 2.0) {
        return Err(SolverError::BadGamma { gamma, d });
    }
    assert!(n >= 1, "sample count must be at least 1");
    Ok(T::of((n as f64).powf(-2.0 * gamma / (2.0 * gamma + d as f64))))
}

/// Companion quadrature-degree floor `s >= lambda^{-1/gamma}`.
pub fn theoretical_degree<T: Real>(lambda: T, gamma: f64) -> usize {
    let l = lambda.to_f64().expect("finite lambda");
    l.powf(-1.0 / gamma).ceil() as usize
}

/// Maps a locally tuned `lambda` to the full-data scale:
/// `lambda^{log_{n_local} n_total}`, which sends `n_local^{-e}` to
/// `n_total^{-e}` for any exponent `e`.
pub fn rescale_lambda<T: Real>(
    lambda: T,
    n_local: usize,
    n_total: usize,
) -> Result<T, SolverError> {
    let l = lambda.to_f64().unwrap_or(f64::NAN);
    if !(l > 0.0 && l < 1.0) {
        return Err(SolverError::RescaleLambdaRange(l));
    }
    if n_local < 2 || n_total < n_local {
        return Err(SolverError::RescaleCounts { n_local, n_total });
    }
    let exponent = (n_total as f64).ln() / (n_local as f64).ln();
    Ok(lambda.powf(T::of(exponent)))
}

/// Winning configuration of a holdout grid search.
#[derive(Debug, Clone)]
pub struct GridSearchOutcome<T> {
    pub config: FitConfig<T>,
    pub holdout_rmse: T,
}

/// Exhaustive grid search over kernels and regularization parameters,
/// scored by RMSE on a disjoint holdout. Exact ties go to the larger
/// lambda (the smoother estimator).
pub fn grid_search<T: Real>(
    data: &LabeledData<T>,
    rule: &QuadratureRule<T>,
    kernel_grid: &[Kernel<T>],
    lambda_grid: &[T],
    holdout: &LabeledData<T>,
) -> Result<GridSearchOutcome<T>, SolverError> {
    if kernel_grid.is_empty() || lambda_grid.is_empty() {
        return Err(SolverError::EmptyGrid);
    }
    let tol = T::geom_tol();
    for (index, h) in holdout.inputs().points().iter().enumerate() {
        if data.inputs.points().iter().any(|p| p.chordal_distance(h) <= tol) {
            return Err(SolverError::HoldoutNotDisjoint { index });
        }
    }

    let n = data.len();
    let active: Vec<usize> = (0..n).filter(|&i| rule.weights()[i] > T::zero()).collect();
    let sites = data.inputs.subset(&active);
    let sqrt_w: Vec<T> = active.iter().map(|&i| rule.weights()[i].sqrt()).collect();
    let rhs: Vec<T> =
        active.iter().zip(&sqrt_w).map(|(&i, &sw)| sw * data.outputs[i]).collect();
    let m = active.len();

    let mut best: Option<(T, T, usize)> = None; // (rmse, lambda, kernel index)
    let mut best_config: Option<FitConfig<T>> = None;
    for (ki, kernel) in kernel_grid.iter().enumerate() {
        let phi = kernel.gram(&sites)?;
        let cross = kernel.cross_gram(holdout.inputs(), &sites)?;
        // all lambda cells share the weighted Gram; factor each in parallel
        let cells: Vec<(T, T)> = lambda_grid
            .par_iter()
            .map(|&lambda| {
                let mut b = Matrix::zeros(m, m);
                for j in 0..m {
                    let col = phi.col(j);
                    let bj = b.col_mut(j);
                    for i in 0..m {
                        bj[i] = sqrt_w[i] * col[i] * sqrt_w[j];
                    }
                    bj[j] += lambda;
                }
                let solution = match Cholesky::factor(b) {
                    Ok(ch) => ch.solve(&rhs),
                    Err(_) => return (lambda, T::infinity()),
                };
                let coeffs: Vec<T> =
                    solution.iter().zip(&sqrt_w).map(|(&bi, &sw)| sw * bi).collect();
                let preds = cross.matvec(&coeffs);
                let mse = preds
                    .iter()
                    .zip(holdout.outputs())
                    .map(|(&p, &y)| (p - y) * (p - y))
                    .sum::<T>()
                    / T::of_usize(holdout.len());
                (lambda, mse.sqrt())
            })
            .collect();
        for (lambda, rmse) in cells {
            let better = match best {
                None => true,
                Some((best_rmse, best_lambda, _)) => {
                    rmse < best_rmse || (rmse == best_rmse && lambda > best_lambda)
                }
            };
            if better {
                best = Some((rmse, lambda, ki));
                best_config = Some(FitConfig::new(lambda, rule.degree(), kernel.clone())?);
            }
        }
    }
    let (rmse, _, _) = best.expect("nonempty grids produce a winner");
    Ok(GridSearchOutcome { config: best_config.expect("config recorded"), holdout_rmse: rmse })
}
