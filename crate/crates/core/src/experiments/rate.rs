//! Convergence-rate probe: RMSE of the theoretically scheduled fit as the
//! sample count grows, summarized by a log-log regression slope.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{rmse, ExperimentError, NoiseKind, NoiseModel, TargetFunction};
use crate::geometry::{fibonacci_points, spiral_points};
use crate::harmonics::{BandLimited, HarmonicIndex};
use crate::kernels::Kernel;
use crate::quadrature::build_quadrature;
use crate::solver::{theoretical_degree, theoretical_lambda, wrls_fit, FitConfig, LabeledData};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct RateCheckResult {
    /// `(n, mean testing RMSE over the seeds)`, ascending in `n`.
    pub per_n: Vec<(usize, f64)>,
    /// OLS slope of `ln rmse` against `ln n`; the schedule's theoretical
    /// exponent is `-gamma / (2 gamma + d)`.
    pub slope: f64,
}

/// A fixed random band-limited target with geometrically decaying spectrum,
/// deterministic in `seed`. Lies in every Sobolev native space.
pub fn random_bandlimited_target<T: Real>(max_degree: usize, seed: u64) -> BandLimited<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(300);
    let mut f = BandLimited::new(2, max_degree);
    for k in 0..=max_degree {
        let scale = (1.0 + k as f64).powf(-3.0);
        for l in 1..=2 * k + 1 {
            let c = rng.random_range(-1.0..1.0) * scale;
            f.set(HarmonicIndex::new(k, l, 2).expect("valid index"), T::of(c))
                .expect("degree within bound");
        }
    }
    f
}

/// Fits noisy samples of a band-limited target on `fibonacci(n)` nodes for
/// each `n`, using the theoretical schedule `lambda = n^{-2 gamma/(2 gamma + d)}`
/// and a constructed positive rule of degree `ceil(lambda^{-1/gamma})`, then
/// regresses the mean testing RMSE against `n` on log-log axes.
pub fn rate_check<T: Real>(
    ns: &[usize],
    seeds: &[u64],
    gamma: f64,
    noise_sigma: f64,
    target_degree: usize,
    target_seed: u64,
    test_size: usize,
) -> Result<RateCheckResult, ExperimentError> {
    assert!(!ns.is_empty() && !seeds.is_empty(), "rate check needs sizes and seeds");
    let target = TargetFunction::band_limited(random_bandlimited_target::<T>(target_degree, target_seed));
    let test_pts = spiral_points::<T>(test_size)?;
    let test_values = target.eval_batch(test_pts.points())?;
    let test = LabeledData::new(test_pts, test_values)?;

    let mut per_n = Vec::with_capacity(ns.len());
    let mut ns_sorted = ns.to_vec();
    ns_sorted.sort_unstable();
    for &n in &ns_sorted {
        let nodes = fibonacci_points::<T>(n)?;
        let lambda = theoretical_lambda::<T>(n, gamma, 2)?;
        let degree = theoretical_degree(lambda, gamma);
        let rule = build_quadrature(&nodes, degree)?;
        let kernel = Kernel::<T>::sobolev(2, gamma)?;
        let cfg = FitConfig::new(lambda, degree, kernel)?;
        let clean = target.eval_batch(nodes.points())?;

        let mut total = 0.0;
        for &seed in seeds {
            let noise = NoiseModel::new(NoiseKind::Gaussian { sigma: noise_sigma }, seed)?;
            // reuse the group-noise stream keyed by the sample count so each
            // (n, seed) pair gets an independent, reproducible draw
            let eps = noise.sample_group::<T>(n, n);
            let outputs: Vec<T> = clean.iter().zip(&eps).map(|(&f, &e)| f + e).collect();
            let data = LabeledData::new(nodes.clone(), outputs)?;
            let est = wrls_fit(&data, &rule, &cfg)?;
            total += rmse(&est, &test)?.to_f64().unwrap_or(f64::NAN);
        }
        per_n.push((n, total / seeds.len() as f64));
    }

    Ok(RateCheckResult { slope: loglog_slope(&per_n), per_n })
}

/// OLS slope of `ln y` on `ln x`.
pub fn loglog_slope(points: &[(usize, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let lx = (x as f64).ln();
        let ly = y.ln();
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}
