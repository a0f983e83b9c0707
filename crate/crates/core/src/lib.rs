//! Scattered-data fitting on the unit sphere with radial basis functions.
//!
//! The crate implements weighted regularized least squares (kernel ridge
//! regression with quadrature weights in the data-fit term) and its
//! divide-and-conquer variant, which averages independently fitted local
//! estimators by sample share. Bottom to top:
//!
//! - [`geometry`]: points on `S^d`, mesh-quality diagnostics, deterministic
//!   point-set generators, and CSV ingestion of external node files,
//! - [`harmonics`]: harmonic-space dimensions, normalized Legendre
//!   polynomials for any ambient dimension, a real orthonormal basis on
//!   `S^2`, and band-limited functions,
//! - [`kernels`]: zonal kernel families (Sobolev, Gaussian, Wendland),
//!   kernel-matrix assembly, and native-space / interpolation norms,
//! - [`quadrature`]: constructive positive quadrature rules on scattered
//!   nodes with exactness and Marcinkiewicz-Zygmund diagnostics,
//! - [`solver`]: the single-server fit, parameter schedules, lambda
//!   rescaling, and holdout grid search,
//! - [`distributed`]: partitioning, concurrent per-server fits, and
//!   size-weighted aggregation behind a structural privacy boundary,
//! - [`experiments`]: target functions, seeded noise, server-count sweeps,
//!   and convergence-rate probes with plot-ready CSV output.
//!
//! All numerics are generic over the scalar type via [`scalar::Real`]
//! (`f32` or `f64`); the aliases below fix the `f64` instantiations used
//! by the command-line tool and the test suites.

pub mod distributed;
pub mod experiments;
pub mod geometry;
pub mod harmonics;
pub mod kernels;
pub mod linalg;
pub mod quadrature;
pub mod scalar;
pub mod solver;

pub use scalar::Real;

/// `f64` instantiations of the main domain types.
pub type SpherePoint64 = geometry::SpherePoint<f64>;
pub type PointSet64 = geometry::PointSet<f64>;
pub type MeshMetrics64 = geometry::MeshMetrics<f64>;
pub type Kernel64 = kernels::Kernel<f64>;
pub type BandLimited64 = harmonics::BandLimited<f64>;
pub type QuadratureRule64 = quadrature::QuadratureRule<f64>;
pub type LabeledData64 = solver::LabeledData<f64>;
pub type FitConfig64 = solver::FitConfig<f64>;
pub type LocalEstimator64 = solver::LocalEstimator<f64>;
pub type GlobalEstimator64 = distributed::GlobalEstimator<f64>;
