//! Divide-and-conquer fitting: data partitioning, independent per-server
//! fits, and size-weighted aggregation of the local estimators.
//!
//! Workers are simulated as concurrent tasks in one process. The only
//! value that crosses from a worker to the coordinator is an
//! [`EstimatorMessage`]; the aggregation code lives in [`aggregate`] and
//! has no access to labeled data, which enforces the scheme's
//! information-flow constraint structurally.

pub mod aggregate;

pub use aggregate::{aggregate_messages, EstimatorMessage, GlobalEstimator};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::kernels::Kernel;
use crate::quadrature::{build_quadrature, QuadratureError, QuadratureRule};
use crate::solver::{
    grid_search, rescale_lambda, theoretical_degree, theoretical_lambda, wrls_fit, FitConfig,
    GridSearchOutcome, LabeledData, SolverError,
};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum DistributedError {
    #[error("the partition scheme needs at least 10 servers, got {0}")]
    TooFewServers(usize),
    #[error("expected 10 rotation groups, got {0}")]
    BadGroupCount(usize),
    #[error("group {group} has {size} samples but must split into {shards} nonempty shards")]
    GroupTooSmall { group: usize, size: usize, shards: usize },
    #[error("no shards to fit")]
    NoShards,
    #[error("shard fits failed on servers {0:?}")]
    ShardFailures(Vec<usize>),
    #[error("all shard fits failed; nothing to aggregate")]
    AllShardsFailed,
    #[error("server {server_id} needs quadrature degree {required}, above the ceiling {ceiling} its {samples} samples admit")]
    DegreeExceedsCapacity { server_id: usize, required: usize, ceiling: usize, samples: usize },
    #[error("server {server_id}: {source}")]
    Shard { server_id: usize, source: SolverError },
    #[error("server {server_id}: {source}")]
    Quadrature { server_id: usize, source: QuadratureError },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// One server's complete fitting assignment.
#[derive(Debug, Clone)]
pub struct Shard<T> {
    pub server_id: usize,
    pub data: LabeledData<T>,
    pub rule: QuadratureRule<T>,
    pub cfg: FitConfig<T>,
}

/// Redistributes the 10 rotation groups over `m >= 10` servers.
///
/// With `tau = m mod 10`: if `tau = 0`, every group splits evenly over
/// `m / 10` servers; otherwise `tau` randomly chosen groups split over
/// `ceil(m / 10)` servers and the remaining `10 - tau` over
/// `floor(m / 10)`. Sample assignment within a group is a seeded shuffle,
/// so the partition is fully determined by `seed`.
pub fn partition_rotation_groups<T: Real>(
    groups: &[LabeledData<T>],
    m: usize,
    seed: u64,
) -> Result<Vec<LabeledData<T>>, DistributedError> {
    if m < 10 {
        return Err(DistributedError::TooFewServers(m));
    }
    if groups.len() != 10 {
        return Err(DistributedError::BadGroupCount(groups.len()));
    }
    let tau = m % 10;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1); // partition sub-stream

    // which groups split into ceil(m/10) shards
    let mut group_ids: Vec<usize> = (0..10).collect();
    let chosen: Vec<usize> = if tau == 0 {
        Vec::new()
    } else {
        group_ids.shuffle(&mut rng);
        let mut c = group_ids[..tau].to_vec();
        c.sort_unstable();
        c
    };

    let mut shards = Vec::with_capacity(m);
    for (g, group) in groups.iter().enumerate() {
        let parts = if chosen.contains(&g) { m.div_ceil(10) } else { m / 10 };
        if group.len() < parts {
            return Err(DistributedError::GroupTooSmall {
                group: g,
                size: group.len(),
                shards: parts,
            });
        }
        if parts == 1 {
            shards.push(group.clone());
            continue;
        }
        let mut order: Vec<usize> = (0..group.len()).collect();
        order.shuffle(&mut rng);
        // spread the remainder over the leading shards
        let base = group.len() / parts;
        let extra = group.len() % parts;
        let mut start = 0;
        for p in 0..parts {
            let take = base + usize::from(p < extra);
            let idx: Vec<usize> = order[start..start + take].to_vec();
            start += take;
            shards.push(group.subset(&idx));
        }
    }
    debug_assert_eq!(shards.len(), m);
    Ok(shards)
}

/// Even split of concatenated data into `m < 10` shards (the degenerate
/// extension used when a sweep starts below ten servers).
pub fn partition_degenerate<T: Real>(
    groups: &[LabeledData<T>],
    m: usize,
) -> Result<Vec<LabeledData<T>>, DistributedError> {
    assert!(m >= 1 && m < 10, "degenerate split covers 1 <= m < 10");
    let sizes: usize = groups.iter().map(LabeledData::len).sum();
    if sizes < m {
        return Err(DistributedError::GroupTooSmall { group: 0, size: sizes, shards: m });
    }
    // concatenate, then chunk evenly
    let mut shards = Vec::with_capacity(m);
    let base = sizes / m;
    let extra = sizes % m;
    let mut flat: Vec<(usize, usize)> = Vec::with_capacity(sizes); // (group, row)
    for (g, group) in groups.iter().enumerate() {
        for i in 0..group.len() {
            flat.push((g, i));
        }
    }
    let mut start = 0;
    for p in 0..m {
        let take = base + usize::from(p < extra);
        let slice = &flat[start..start + take];
        start += take;
        // gather per-group index lists to reuse subset()
        let mut parts: Vec<LabeledData<T>> = Vec::new();
        let mut g_cur = usize::MAX;
        let mut idx: Vec<usize> = Vec::new();
        for &(g, i) in slice {
            if g != g_cur && !idx.is_empty() {
                parts.push(groups[g_cur].subset(&idx));
                idx.clear();
            }
            g_cur = g;
            idx.push(i);
        }
        if !idx.is_empty() {
            parts.push(groups[g_cur].subset(&idx));
        }
        shards.push(concat_labeled(&parts));
    }
    Ok(shards)
}

fn concat_labeled<T: Real>(parts: &[LabeledData<T>]) -> LabeledData<T> {
    let mut points = Vec::new();
    let mut outputs = Vec::new();
    for p in parts {
        points.extend_from_slice(p.inputs().points());
        outputs.extend_from_slice(p.outputs());
    }
    let set = crate::geometry::PointSet::new(points, None)
        .expect("concatenation of disjoint shards stays distinct");
    LabeledData::new(set, outputs).expect("lengths preserved")
}

/// Rule deciding each server's regularization and quadrature degree.
#[derive(Debug, Clone)]
pub enum ConfigRule<T> {
    /// `lambda_j = |D|^{-2 gamma/(2 gamma + d)}`, `s_j = ceil(lambda_j^{-1/gamma})`,
    /// with a constructed positive rule of degree `s_j` on each server.
    Theoretical { gamma: f64 },
    /// Per-server holdout grid search over the given grids (on a capped,
    /// seeded subsample), then `lambda` rescaled from the tuned size to
    /// the total sample count. Uses equal weights on each server.
    CvRescaled {
        kernel_grid: Vec<Kernel<T>>,
        lambda_grid: Vec<T>,
        /// Cap on the grid-search training subsample per server.
        cv_train_cap: usize,
        /// Cap on the holdout subsample per server.
        cv_holdout_cap: usize,
        seed: u64,
        /// Smoothness used only for the server-count bound warning; grid
        /// search itself needs no smoothness index.
        advisory_gamma: Option<f64>,
    },
}

/// Upper bound on the server count before the theoretical schedule becomes
/// unsatisfiable (evaluated with proportionality constant 1):
/// `m <= n^{(2 gamma - d) / (2 gamma + d)}`.
pub fn server_count_bound(n_total: usize, gamma: f64, d: usize) -> f64 {
    (n_total as f64).powf((2.0 * gamma - d as f64) / (2.0 * gamma + d as f64))
}

/// Builds per-server shards (rule + config) from partitioned data.
///
/// Emits a warning when the server count exceeds [`server_count_bound`];
/// the bound's constants are unknown, so this is advisory, not an error.
pub fn per_shard_config<T: Real>(
    shard_data: Vec<LabeledData<T>>,
    d: usize,
    rule: &ConfigRule<T>,
) -> Result<Vec<Shard<T>>, DistributedError> {
    if shard_data.is_empty() {
        return Err(DistributedError::NoShards);
    }
    let n_total: usize = shard_data.iter().map(LabeledData::len).sum();
    let bound_gamma = match rule {
        ConfigRule::Theoretical { gamma } => Some(*gamma),
        ConfigRule::CvRescaled { advisory_gamma, .. } => *advisory_gamma,
    };
    if let Some(gamma) = bound_gamma {
        let bound = server_count_bound(n_total, gamma, d);
        if shard_data.len() as f64 > bound {
            log::warn!(
                "{} servers exceed the schedule bound {:.1} for n = {n_total}; the theoretical guarantees degrade",
                shard_data.len(),
                bound
            );
        }
    }

    match rule {
        ConfigRule::Theoretical { gamma } => {
            let lambda = theoretical_lambda::<T>(n_total, *gamma, d)?;
            let degree = theoretical_degree(lambda, *gamma);
            let kernel = Kernel::sobolev(d, *gamma).map_err(SolverError::Kernel)?;
            shard_data
                .into_iter()
                .enumerate()
                .map(|(server_id, data)| {
                    // buildable ceiling: moment count at most the node count
                    let mut ceiling = 0usize;
                    while (ceiling + 2) * (ceiling + 2) <= data.len() {
                        ceiling += 1;
                    }
                    if degree > ceiling {
                        return Err(DistributedError::DegreeExceedsCapacity {
                            server_id,
                            required: degree,
                            ceiling,
                            samples: data.len(),
                        });
                    }
                    let rule = build_quadrature(data.inputs(), degree)
                        .map_err(|source| DistributedError::Quadrature { server_id, source })?;
                    let cfg = FitConfig::new(lambda, degree, kernel.clone())
                        .map_err(DistributedError::Solver)?;
                    Ok(Shard { server_id, data, rule, cfg })
                })
                .collect()
        }
        ConfigRule::CvRescaled {
            kernel_grid, lambda_grid, cv_train_cap, cv_holdout_cap, seed, ..
        } => {
            shard_data
                .into_iter()
                .enumerate()
                .map(|(server_id, data)| {
                    let outcome = cv_select(
                        &data,
                        kernel_grid,
                        lambda_grid,
                        *cv_train_cap,
                        *cv_holdout_cap,
                        seed.wrapping_add(server_id as u64),
                        n_total,
                    )
                    .map_err(|source| DistributedError::Shard { server_id, source })?;
                    let rule = QuadratureRule::uniform(data.inputs().clone());
                    Ok(Shard { server_id, data, rule, cfg: outcome })
                })
                .collect()
        }
    }
}

/// Grid search on a capped subsample of one server's data, with the
/// winning lambda rescaled from the tuned sample count to `n_total`
/// (lambda = 1 is a fixed point of the rescaling map and passes through).
fn cv_select<T: Real>(
    data: &LabeledData<T>,
    kernel_grid: &[Kernel<T>],
    lambda_grid: &[T],
    train_cap: usize,
    holdout_cap: usize,
    seed: u64,
    n_total: usize,
) -> Result<FitConfig<T>, SolverError> {
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2); // cv-split sub-stream
    order.shuffle(&mut rng);
    let n_hold = (n / 3).min(holdout_cap).max(1);
    let n_train = (n - n_hold).min(train_cap).max(1);
    let holdout = data.subset(&order[..n_hold]);
    let train = data.subset(&order[n_hold..n_hold + n_train]);
    let rule = QuadratureRule::uniform(train.inputs().clone());
    let GridSearchOutcome { config, .. } =
        grid_search(&train, &rule, kernel_grid, lambda_grid, &holdout)?;
    let lambda = if config.lambda < T::one() && n_train >= 2 && n_total >= n_train {
        rescale_lambda(config.lambda, n_train, n_total)?
    } else {
        config.lambda
    };
    FitConfig::new(lambda, config.quad_degree, config.kernel)
}

/// Runs every shard fit (concurrently) and aggregates the local estimators
/// into the size-weighted global average.
///
/// Fail-fast by default: any shard failure aborts with the failing server
/// ids. With `allow_partial`, surviving estimators are aggregated with
/// weights renormalized over the survivors (a documented deviation from
/// the all-or-nothing scheme).
pub fn dwrls_fit<T: Real>(
    shards: &[Shard<T>],
    allow_partial: bool,
) -> Result<GlobalEstimator<T>, DistributedError> {
    if shards.is_empty() {
        return Err(DistributedError::NoShards);
    }
    let results: Vec<(usize, Result<EstimatorMessage<T>, SolverError>)> = shards
        .par_iter()
        .map(|shard| {
            let fit = wrls_fit(&shard.data, &shard.rule, &shard.cfg).map(|estimator| {
                EstimatorMessage {
                    server_id: shard.server_id,
                    sample_count: estimator.sample_count(),
                    estimator,
                }
            });
            (shard.server_id, fit)
        })
        .collect();

    let mut messages = Vec::with_capacity(results.len());
    let mut failed = Vec::new();
    for (server_id, result) in results {
        match result {
            Ok(msg) => messages.push(msg),
            Err(err) => {
                log::warn!("server {server_id} fit failed: {err}");
                failed.push(server_id);
            }
        }
    }
    if !failed.is_empty() && !allow_partial {
        return Err(DistributedError::ShardFailures(failed));
    }
    if messages.is_empty() {
        return Err(DistributedError::AllShardsFailed);
    }
    Ok(aggregate_messages(messages))
}

#[cfg(test)]
mod tests;
