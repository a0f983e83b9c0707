//! Target functions, noise models, and reproducible end-to-end fitting
//! experiments with plot-ready CSV output.

mod rate;
mod sweep;

pub use rate::{loglog_slope, random_bandlimited_target, rate_check, RateCheckResult};
pub use sweep::{run_sweep, write_results, ExperimentResult, SweepCell, SweepConfig};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use thiserror::Error;

use crate::distributed::{DistributedError, GlobalEstimator};
use crate::geometry::{equal_area_centers, rotate, GeometryError, PointSet, SpherePoint};
use crate::harmonics::{BandLimited, HarmonicsError};
use crate::kernels::{wendland_profile, KernelError};
use crate::quadrature::QuadratureError;
use crate::solver::{LabeledData, LocalEstimator, SolverError};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("target functions live on S^2, got d = {0}")]
    UnsupportedDimension(usize),
    #[error("noise parameter must be positive, got {0}")]
    BadNoiseParameter(f64),
    #[error("test set must be nonempty")]
    EmptyTestSet,
    #[error("sweep needs a nonempty server-count list and seed list")]
    EmptySweep,
    #[error("failed to write results: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Harmonics(#[from] HarmonicsError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Distributed(#[from] DistributedError),
}

/// Ground-truth functions for the simulation study.
#[derive(Debug, Clone)]
pub enum TargetFunction<T> {
    /// Sum of compactly supported bumps at the equal-area region centers.
    WendlandSum { centers: PointSet<T> },
    /// The Franke test function in its spherical (Renka) form.
    Franke,
    /// A fixed band-limited function.
    BandLimited(BandLimited<T>),
}

impl<T: Real> TargetFunction<T> {
    /// `f_1(x) = sum_i psi((x - z_i))` over the `n` equal-area centers.
    pub fn wendland_sum(n_centers: usize) -> Result<Self, ExperimentError> {
        Ok(Self::WendlandSum { centers: equal_area_centers(n_centers)? })
    }

    pub fn franke() -> Self {
        Self::Franke
    }

    pub fn band_limited(f: BandLimited<T>) -> Self {
        Self::BandLimited(f)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::WendlandSum { .. } => "wendland",
            Self::Franke => "franke",
            Self::BandLimited(_) => "bandlimited",
        }
    }

    pub fn eval(&self, x: &SpherePoint<T>) -> Result<T, ExperimentError> {
        if x.dim() != 2 {
            return Err(ExperimentError::UnsupportedDimension(x.dim()));
        }
        match self {
            Self::WendlandSum { centers } => Ok(centers
                .points()
                .iter()
                .map(|z| wendland_profile(x.chordal_distance(z)))
                .sum()),
            Self::Franke => {
                let c = x.coords();
                let (x1, x2, x3) = (
                    c[0].to_f64().expect("finite"),
                    c[1].to_f64().expect("finite"),
                    c[2].to_f64().expect("finite"),
                );
                let t1 = 0.75
                    * (-(9.0 * x1 - 2.0).powi(2) / 4.0
                        - (9.0 * x2 - 2.0).powi(2) / 4.0
                        - (9.0 * x3 - 2.0).powi(2) / 4.0)
                        .exp();
                let t2 = 0.75
                    * (-(9.0 * x1 + 1.0).powi(2) / 49.0
                        - (9.0 * x2 + 1.0) / 10.0
                        - (9.0 * x3 + 1.0) / 10.0)
                        .exp();
                let t3 = 0.5
                    * (-(9.0 * x1 - 7.0).powi(2) / 4.0
                        - (9.0 * x2 - 3.0).powi(2) / 4.0
                        - (9.0 * x3 - 5.0).powi(2) / 4.0)
                        .exp();
                let t4 = 0.2
                    * (-(9.0 * x1 - 4.0).powi(2)
                        - (9.0 * x2 - 7.0).powi(2)
                        - (9.0 * x3 - 5.0).powi(2))
                    .exp();
                Ok(T::of(t1 + t2 + t3 - t4))
            }
            Self::BandLimited(f) => Ok(f.eval(x)?),
        }
    }

    pub fn eval_batch(&self, pts: &[SpherePoint<T>]) -> Result<Vec<T>, ExperimentError> {
        pts.par_iter().map(|x| self.eval(x)).collect()
    }
}

/// Observation-noise model with a named random stream per rotation group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    Gaussian { sigma: f64 },
    BoundedUniform { bound: f64 },
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    kind: NoiseKind,
    seed: u64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, seed: u64) -> Result<Self, ExperimentError> {
        match kind {
            NoiseKind::Gaussian { sigma } if !(sigma > 0.0) => {
                Err(ExperimentError::BadNoiseParameter(sigma))
            }
            NoiseKind::BoundedUniform { bound } if !(bound > 0.0) => {
                Err(ExperimentError::BadNoiseParameter(bound))
            }
            _ => Ok(Self { kind, seed }),
        }
    }

    pub fn none() -> Self {
        Self { kind: NoiseKind::None, seed: 0 }
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    /// Noise vector for one rotation group, drawn from the group's own
    /// sub-stream so groups are independent yet fully seeded.
    pub fn sample_group<T: Real>(&self, group: usize, n: usize) -> Vec<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(100 + group as u64);
        match self.kind {
            NoiseKind::None => vec![T::zero(); n],
            NoiseKind::Gaussian { sigma } => {
                let dist = Normal::new(0.0, sigma).expect("sigma validated");
                (0..n).map(|_| T::of(dist.sample(&mut rng))).collect()
            }
            NoiseKind::BoundedUniform { bound } => {
                let dist = Uniform::new(-bound, bound).expect("bound validated");
                (0..n).map(|_| T::of(dist.sample(&mut rng))).collect()
            }
        }
    }
}

/// Training data as ten rotated copies of the base node set:
/// group `j` has inputs `A_j x` and outputs `f(A_j x) + noise`.
pub fn generate_training_data<T: Real>(
    target: &TargetFunction<T>,
    base: &PointSet<T>,
    noise: &NoiseModel,
) -> Result<Vec<LabeledData<T>>, ExperimentError> {
    (1..=10)
        .map(|j| {
            let inputs = rotate(base, j)?;
            let clean = target.eval_batch(inputs.points())?;
            let eps = noise.sample_group::<T>(j, clean.len());
            let outputs: Vec<T> = clean.iter().zip(&eps).map(|(&f, &e)| f + e).collect();
            Ok(LabeledData::new(inputs, outputs)?)
        })
        .collect()
}

/// Anything that predicts values at sphere points (local or global fits).
pub trait SphereEstimator<T: Real> {
    fn predict(&self, pts: &[SpherePoint<T>]) -> Result<Vec<T>, SolverError>;
}

impl<T: Real> SphereEstimator<T> for LocalEstimator<T> {
    fn predict(&self, pts: &[SpherePoint<T>]) -> Result<Vec<T>, SolverError> {
        self.evaluate_batch(pts)
    }
}

impl<T: Real> SphereEstimator<T> for GlobalEstimator<T> {
    fn predict(&self, pts: &[SpherePoint<T>]) -> Result<Vec<T>, SolverError> {
        self.evaluate_batch(pts)
    }
}

/// Root mean squared prediction error over a labeled test set.
pub fn rmse<T: Real, E: SphereEstimator<T>>(
    est: &E,
    test: &LabeledData<T>,
) -> Result<T, ExperimentError> {
    if test.is_empty() {
        return Err(ExperimentError::EmptyTestSet);
    }
    let preds = est.predict(test.inputs().points())?;
    let mse = preds
        .iter()
        .zip(test.outputs())
        .map(|(&p, &y)| (p - y) * (p - y))
        .sum::<T>()
        / T::of_usize(test.len());
    Ok(mse.sqrt())
}

/// `{ base^-q : base^-q > 1e-10, q = 0, 1, 2, ... }`, descending.
pub fn geometric_lambda_grid<T: Real>(base: u32) -> Vec<T> {
    let base = base as f64;
    let mut grid = Vec::new();
    let mut q = 0i32;
    loop {
        let v = base.powi(-q);
        if v <= 1e-10 {
            break;
        }
        grid.push(T::of(v));
        q += 1;
    }
    grid
}

/// Ten kernel widths, logarithmically equally spaced on `[0.1, 1]`.
pub fn sigma_grid() -> Vec<f64> {
    (0..10).map(|i| 10f64.powf(-1.0 + i as f64 / 9.0)).collect()
}
