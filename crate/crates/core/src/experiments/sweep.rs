//! Server-count sweeps: partition, per-server cross-validated fits,
//! aggregation, and testing RMSE, emitted as plot-ready CSV files.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::{generate_training_data, rmse, ExperimentError, NoiseKind, NoiseModel, TargetFunction};
use crate::distributed::{
    dwrls_fit, partition_degenerate, partition_rotation_groups, per_shard_config, ConfigRule,
};
use crate::geometry::PointSet;
use crate::kernels::{Kernel, KernelSpec};
use crate::solver::LabeledData;
use crate::scalar::Real;

/// Complete description of one sweep run.
#[derive(Debug, Clone)]
pub struct SweepConfig<T> {
    pub target: TargetFunction<T>,
    pub kernel_grid: Vec<Kernel<T>>,
    pub lambda_grid: Vec<T>,
    /// Base training node set; its ten rotations form the groups.
    pub base_points: PointSet<T>,
    /// Test inputs; outputs are the noise-free target values.
    pub test_points: PointSet<T>,
    pub m_list: Vec<usize>,
    pub seeds: Vec<u64>,
    pub noise_sigma: f64,
    /// Per-server grid-search subsample caps.
    pub cv_train_cap: usize,
    pub cv_holdout_cap: usize,
    /// Capture per-point test residuals for the first seed of each `m`.
    pub capture_residuals: bool,
}

impl<T: Real> SweepConfig<T> {
    pub fn total_samples(&self) -> usize {
        10 * self.base_points.len()
    }
}

/// One `(m, seed)` sweep cell.
#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub m: usize,
    pub seed: u64,
    /// Testing RMSE; NaN when the cell failed.
    pub rmse: f64,
    pub wall_ms: u128,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Per-point residual record behind the surface plots.
#[derive(Debug, Clone)]
pub struct ResidualRow {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub truth: f64,
    pub pred: f64,
    pub err: f64,
}

#[derive(Debug)]
pub struct ExperimentResult {
    pub cells: Vec<SweepCell>,
    /// `(m, rows)` for the first seed of each server count.
    pub residuals: Vec<(usize, Vec<ResidualRow>)>,
    /// Provenance snapshot serialized into `config.json`.
    pub provenance: serde_json::Value,
}

impl ExperimentResult {
    /// Mean RMSE per server count over the successful seeds.
    pub fn mean_rmse_by_m(&self) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = Vec::new();
        let mut ms: Vec<usize> = self.cells.iter().map(|c| c.m).collect();
        ms.sort_unstable();
        ms.dedup();
        for m in ms {
            let vals: Vec<f64> = self
                .cells
                .iter()
                .filter(|c| c.m == m && c.error.is_none())
                .map(|c| c.rmse)
                .collect();
            if !vals.is_empty() {
                out.push((m, vals.iter().sum::<f64>() / vals.len() as f64));
            }
        }
        out
    }
}

/// Runs the whole sweep. Cells are independent; failures are recorded in
/// the affected cell rather than aborting the sweep.
pub fn run_sweep<T: Real>(config: &SweepConfig<T>) -> Result<ExperimentResult, ExperimentError> {
    if config.m_list.is_empty() || config.seeds.is_empty() {
        return Err(ExperimentError::EmptySweep);
    }
    let mut m_list = config.m_list.clone();
    m_list.sort_unstable();
    m_list.dedup();

    let test_values = config.target.eval_batch(config.test_points.points())?;
    let test = LabeledData::new(config.test_points.clone(), test_values)?;

    let cells_spec: Vec<(usize, u64, bool)> = m_list
        .iter()
        .flat_map(|&m| {
            config
                .seeds
                .iter()
                .enumerate()
                .map(move |(i, &seed)| (m, seed, i == 0 && config.capture_residuals))
        })
        .collect();

    let outcomes: Vec<(SweepCell, Option<(usize, Vec<ResidualRow>)>)> = cells_spec
        .par_iter()
        .map(|&(m, seed, capture)| run_cell(config, &test, m, seed, capture))
        .collect();

    let mut cells = Vec::with_capacity(outcomes.len());
    let mut residuals = Vec::new();
    for (cell, resid) in outcomes {
        cells.push(cell);
        if let Some(r) = resid {
            residuals.push(r);
        }
    }
    residuals.sort_by_key(|(m, _)| *m);

    let provenance = serde_json::json!({
        "target": config.target.name(),
        "kernels": config.kernel_grid.iter().map(Kernel::spec).collect::<Vec<KernelSpec>>(),
        "lambda_grid": config.lambda_grid.iter().map(|l| l.to_f64().unwrap_or(f64::NAN)).collect::<Vec<f64>>(),
        "base_points": {
            "label": config.base_points.label(),
            "count": config.base_points.len(),
        },
        "test_points": config.test_points.len(),
        "total_samples": config.total_samples(),
        "m_list": m_list,
        "seeds": config.seeds,
        "noise_sigma": config.noise_sigma,
        "cv_train_cap": config.cv_train_cap,
        "cv_holdout_cap": config.cv_holdout_cap,
    });

    Ok(ExperimentResult { cells, residuals, provenance })
}

fn run_cell<T: Real>(
    config: &SweepConfig<T>,
    test: &LabeledData<T>,
    m: usize,
    seed: u64,
    capture: bool,
) -> (SweepCell, Option<(usize, Vec<ResidualRow>)>) {
    let start = Instant::now();
    let attempt = || -> Result<(f64, Option<Vec<ResidualRow>>), ExperimentError> {
        let noise = NoiseModel::new(NoiseKind::Gaussian { sigma: config.noise_sigma }, seed)?;
        let groups = generate_training_data(&config.target, &config.base_points, &noise)?;
        let shard_data = if m >= 10 {
            partition_rotation_groups(&groups, m, seed)?
        } else {
            partition_degenerate(&groups, m)?
        };
        let rule = ConfigRule::CvRescaled {
            kernel_grid: config.kernel_grid.clone(),
            lambda_grid: config.lambda_grid.clone(),
            cv_train_cap: config.cv_train_cap,
            cv_holdout_cap: config.cv_holdout_cap,
            seed,
            advisory_gamma: None,
        };
        let shards = per_shard_config(shard_data, 2, &rule)?;
        let global = dwrls_fit(&shards, false)?;
        let err = rmse(&global, test)?.to_f64().unwrap_or(f64::NAN);
        let rows = if capture {
            let preds = global.evaluate_batch(test.inputs().points())?;
            Some(
                test.inputs()
                    .points()
                    .iter()
                    .zip(test.outputs())
                    .zip(preds)
                    .map(|((p, &truth), pred)| {
                        let c = p.coords();
                        let truth = truth.to_f64().unwrap_or(f64::NAN);
                        let pred = pred.to_f64().unwrap_or(f64::NAN);
                        ResidualRow {
                            x: c[0].to_f64().unwrap_or(f64::NAN),
                            y: c[1].to_f64().unwrap_or(f64::NAN),
                            z: c[2].to_f64().unwrap_or(f64::NAN),
                            truth,
                            pred,
                            err: pred - truth,
                        }
                    })
                    .collect(),
            )
        } else {
            None
        };
        Ok((err, rows))
    };
    match attempt() {
        Ok((err, rows)) => (
            SweepCell { m, seed, rmse: err, wall_ms: start.elapsed().as_millis(), error: None },
            rows.map(|r| (m, r)),
        ),
        Err(e) => {
            log::warn!("sweep cell (m = {m}, seed = {seed}) failed: {e}");
            (
                SweepCell {
                    m,
                    seed,
                    rmse: f64::NAN,
                    wall_ms: start.elapsed().as_millis(),
                    error: Some(e.to_string()),
                },
                None,
            )
        }
    }
}

/// Writes `rmse.csv`, `residuals_m{M}.csv`, and `config.json` under `dir`.
///
/// All numeric payloads are deterministic for a fixed seed and config; the
/// `wall_ms` column is wall-clock provenance and varies between runs.
pub fn write_results(result: &ExperimentResult, dir: &Path) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(dir)?;
    let mut rmse_csv = String::from("m,seed,rmse,wall_ms\n");
    for c in &result.cells {
        rmse_csv.push_str(&format!("{},{},{},{}\n", c.m, c.seed, c.rmse, c.wall_ms));
    }
    std::fs::write(dir.join("rmse.csv"), rmse_csv)?;

    for (m, rows) in &result.residuals {
        let mut csv = String::from("x,y,z,true,pred,err\n");
        for r in rows {
            csv.push_str(&format!("{},{},{},{},{},{}\n", r.x, r.y, r.z, r.truth, r.pred, r.err));
        }
        std::fs::write(dir.join(format!("residuals_m{m}.csv")), csv)?;
    }

    let config = serde_json::to_string_pretty(&result.provenance).expect("provenance serializes");
    std::fs::write(dir.join("config.json"), config)?;
    Ok(())
}
