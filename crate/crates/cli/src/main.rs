//! Command-line driver for fitting noisy scattered data on the sphere:
//! point generation, positive quadrature construction, single-server and
//! distributed fits, estimator evaluation, and simulation sweeps.

mod error;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use error::CliError;
use spherefit::distributed::{
    dwrls_fit, partition_degenerate, partition_rotation_groups, per_shard_config, ConfigRule,
};
use spherefit::experiments::{
    geometric_lambda_grid, run_sweep, sigma_grid, write_results, SweepConfig, TargetFunction,
};
use spherefit::geometry::{generate, load_point_set, save_point_set, GeneratorKind};
use spherefit::kernels::KernelSpec;
use spherefit::quadrature::{build_quadrature, verify_exactness};
use spherefit::solver::wrls_fit;
use spherefit::{
    FitConfig64, GlobalEstimator64, Kernel64, LabeledData64, LocalEstimator64, PointSet64,
    QuadratureRule64,
};

#[derive(Parser, Debug)]
#[command(
    name = "spherefit",
    version,
    about = "Radial-basis-function fitting of scattered data on the unit sphere",
    propagate_version = true
)]
struct Cli {
    /// Master seed; all randomness (partition, noise, CV splits) flows from
    /// named sub-streams of this value.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Cap on concurrent worker threads (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// JSON file supplying values for omitted flags; explicit flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Print the resolved plan as JSON and exit without computing.
    #[arg(long, global = true)]
    dry_run: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a deterministic point set and write it as CSV.
    GenPoints(GenPointsArgs),
    /// Build or verify positive quadrature rules.
    #[command(subcommand)]
    Quadrature(QuadratureCmd),
    /// Single-server weighted regularized least squares fit.
    Fit(FitArgs),
    /// Distributed fit: partition groups, fit per server, aggregate.
    Dfit(DfitArgs),
    /// Evaluate a stored estimator at points from a CSV file.
    Eval(EvalArgs),
    /// Reproduce a full simulation sweep over server counts.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
struct GenPointsArgs {
    /// Generator: spiral, fibonacci, or equal-area-centers.
    #[arg(long)]
    kind: Option<GeneratorKind>,
    /// Number of points.
    #[arg(long)]
    n: Option<usize>,
    /// Output CSV path (header x0,x1,x2).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum QuadratureCmd {
    /// Solve the moment system for nonnegative weights on given nodes.
    Build(QuadBuildArgs),
    /// Report the exactness defect of a stored rule at a given degree.
    Verify(QuadVerifyArgs),
}

#[derive(Args, Debug)]
struct QuadBuildArgs {
    /// Node CSV (header x0,x1,x2).
    #[arg(long)]
    points: Option<PathBuf>,
    /// Design degree of the rule.
    #[arg(long)]
    degree: Option<usize>,
    /// Output CSV path (x0,x1,x2,w plus a .json sidecar).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Accept node rows whose norm deviates from 1 by more than 1e-6.
    #[arg(long)]
    lenient: bool,
}

#[derive(Args, Debug)]
struct QuadVerifyArgs {
    /// Rule CSV written by `quadrature build`.
    #[arg(long)]
    rule: Option<PathBuf>,
    /// Degree at which to check the moments.
    #[arg(long)]
    degree: Option<usize>,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Labeled data CSV (header x0,x1,x2,y).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Quadrature rule CSV on exactly the data sites.
    #[arg(long)]
    rule: Option<PathBuf>,
    /// Regularization parameter.
    #[arg(long)]
    lambda: Option<f64>,
    /// Kernel spec JSON file: {"family": ..., "gamma"/"tau"/"sigma"...}.
    #[arg(long)]
    kernel: Option<PathBuf>,
    /// Output estimator JSON path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Accept data rows whose input norm deviates from 1 by more than 1e-6.
    #[arg(long)]
    lenient: bool,
}

#[derive(Args, Debug)]
struct DfitArgs {
    /// Comma-separated labeled CSV paths, one per rotation group (10 for
    /// the rotation-group partition scheme).
    #[arg(long, value_delimiter = ',')]
    groups: Vec<PathBuf>,
    /// Number of local servers.
    #[arg(long)]
    servers: Option<usize>,
    /// Smoothness index for the theoretical schedule.
    #[arg(long)]
    gamma: Option<f64>,
    /// Parameter selection: theoretical or cv.
    #[arg(long)]
    mode: Option<String>,
    /// Kernel spec JSON (cv mode; theoretical mode uses the Sobolev kernel).
    #[arg(long)]
    kernel: Option<PathBuf>,
    /// Lambda grid base for cv mode (2 or 3).
    #[arg(long)]
    lambda_base: Option<u32>,
    /// Aggregate surviving servers if some fits fail.
    #[arg(long)]
    allow_partial: bool,
    /// Output global-estimator JSON path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Accept data rows whose input norm deviates from 1 by more than 1e-6.
    #[arg(long)]
    lenient: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Estimator JSON (local or global; detected by shape).
    #[arg(long)]
    estimator: Option<PathBuf>,
    /// Points CSV (header x0,x1,x2).
    #[arg(long)]
    points: Option<PathBuf>,
    /// Output CSV path (x0,x1,x2,value).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Accept point rows whose norm deviates from 1 by more than 1e-6.
    #[arg(long)]
    lenient: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Target function: wendland or franke.
    #[arg(long)]
    target: Option<String>,
    /// Spherical design CSV for the base nodes; omitted: Fibonacci fallback.
    #[arg(long)]
    design_file: Option<PathBuf>,
    /// Base node count for the Fibonacci fallback.
    #[arg(long)]
    base_n: Option<usize>,
    /// Server counts to sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    m: Vec<usize>,
    /// Number of seeds per cell (seeds 0..count).
    #[arg(long)]
    seeds: Option<u64>,
    /// Test grid size (generalized spiral points).
    #[arg(long)]
    test_n: Option<usize>,
    /// Noise standard deviation.
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Per-server grid-search subsample caps.
    #[arg(long)]
    cv_train_cap: Option<usize>,
    #[arg(long)]
    cv_holdout_cap: Option<usize>,
    /// Skip per-point residual files.
    #[arg(long)]
    no_residuals: bool,
    /// Output directory for rmse.csv, residuals_m{M}.csv, config.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are not errors
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            log::warn!("could not cap worker threads: {e}");
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code as u8)
        }
    }
}

/// Values from `--config`, consulted only for flags the user omitted.
struct FileConfig(serde_json::Value);

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self(serde_json::Value::Null)),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::io(format!("config {}: {e}", p.display())))?;
                let value = serde_json::from_str(&text)
                    .map_err(|e| CliError::usage(format!("config {}: {e}", p.display())))?;
                Ok(Self(value))
            }
        }
    }

    fn fill<T: serde::de::DeserializeOwned>(&self, flag: Option<T>, key: &str) -> Option<T> {
        flag.or_else(|| {
            self.0
                .get(key)
                .cloned()
                .and_then(|v| serde_json::from_value(v).ok())
        })
    }

    fn fill_vec<T: serde::de::DeserializeOwned>(&self, flag: Vec<T>, key: &str) -> Vec<T> {
        if flag.is_empty() {
            self.0
                .get(key)
                .cloned()
                .and_then(|v| serde_json::from_value(v).ok())
                .unwrap_or_default()
        } else {
            flag
        }
    }
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::usage(format!("missing required flag --{flag}")))
}

fn plan_or_run<P: Serialize>(dry_run: bool, plan: &P, run: impl FnOnce() -> Result<(), CliError>) -> Result<(), CliError> {
    if dry_run {
        println!("{}", serde_json::to_string_pretty(plan).expect("plan serializes"));
        return Ok(());
    }
    run()
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = FileConfig::load(cli.config.as_deref())?;
    let seed = cfg.fill(cli.seed, "seed").unwrap_or(0);
    match &cli.command {
        Command::GenPoints(args) => gen_points(cli, &cfg, args),
        Command::Quadrature(QuadratureCmd::Build(args)) => quad_build(cli, &cfg, args),
        Command::Quadrature(QuadratureCmd::Verify(args)) => quad_verify(cli, &cfg, args),
        Command::Fit(args) => fit(cli, &cfg, args),
        Command::Dfit(args) => dfit(cli, &cfg, args, seed),
        Command::Eval(args) => eval(cli, &cfg, args),
        Command::Simulate(args) => simulate(cli, &cfg, args, seed),
    }
}

fn gen_points(cli: &Cli, cfg: &FileConfig, args: &GenPointsArgs) -> Result<(), CliError> {
    let kind = match args.kind {
        Some(k) => k,
        None => {
            let from_cfg: Option<String> = cfg.fill(None, "kind");
            match from_cfg {
                Some(s) => s.parse::<GeneratorKind>().map_err(CliError::usage)?,
                None => return Err(CliError::usage("missing required flag --kind")),
            }
        }
    };
    let n = require(cfg.fill(args.n, "n"), "n")?;
    let out = require(cfg.fill(args.out.clone(), "out"), "out")?;
    let plan = serde_json::json!({
        "command": "gen-points", "kind": kind.to_string(), "n": n, "out": out,
    });
    plan_or_run(cli.dry_run, &plan, || {
        let pts = generate::<f64>(kind, n)?;
        save_point_set(&pts, &out)?;
        println!("wrote {} points to {}", pts.len(), out.display());
        Ok(())
    })
}

fn quad_build(cli: &Cli, cfg: &FileConfig, args: &QuadBuildArgs) -> Result<(), CliError> {
    let points = require(cfg.fill(args.points.clone(), "points"), "points")?;
    let degree = require(cfg.fill(args.degree, "degree"), "degree")?;
    let out = require(cfg.fill(args.out.clone(), "out"), "out")?;
    let plan = serde_json::json!({
        "command": "quadrature build", "points": points, "degree": degree, "out": out,
        "lenient": args.lenient,
    });
    plan_or_run(cli.dry_run, &plan, || {
        let pts: PointSet64 = load_point_set(&points, args.lenient)?;
        let rule = build_quadrature(&pts, degree)?;
        rule.save(&out)?;
        println!(
            "degree-{degree} rule on {} nodes: residual {:.3e}, c1 {:.3}, written to {}",
            rule.len(),
            rule.residual(),
            rule.c1_observed(),
            out.display()
        );
        Ok(())
    })
}

fn quad_verify(cli: &Cli, cfg: &FileConfig, args: &QuadVerifyArgs) -> Result<(), CliError> {
    let rule_path = require(cfg.fill(args.rule.clone(), "rule"), "rule")?;
    let degree = require(cfg.fill(args.degree, "degree"), "degree")?;
    let plan = serde_json::json!({
        "command": "quadrature verify", "rule": rule_path, "degree": degree,
    });
    plan_or_run(cli.dry_run, &plan, || {
        let rule = QuadratureRule64::load(&rule_path)?;
        let defect = verify_exactness(&rule, degree)?;
        println!(
            "rule of degree {} on {} nodes: normalized defect {defect:.6e} at degree {degree}",
            rule.degree(),
            rule.len()
        );
        Ok(())
    })
}

fn load_kernel_spec(path: &Path) -> Result<Kernel64, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("kernel spec {}: {e}", path.display())))?;
    let spec: KernelSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("kernel spec {}: {e}", path.display())))?;
    Ok(spec.build::<f64>(2)?)
}

fn fit(cli: &Cli, cfg: &FileConfig, args: &FitArgs) -> Result<(), CliError> {
    let data_path = require(cfg.fill(args.data.clone(), "data"), "data")?;
    let rule_path = require(cfg.fill(args.rule.clone(), "rule"), "rule")?;
    let lambda = require(cfg.fill(args.lambda, "lambda"), "lambda")?;
    let kernel_path = require(cfg.fill(args.kernel.clone(), "kernel"), "kernel")?;
    let out = require(cfg.fill(args.out.clone(), "out"), "out")?;
    let plan = serde_json::json!({
        "command": "fit", "data": data_path, "rule": rule_path, "lambda": lambda,
        "kernel": kernel_path, "out": out, "lenient": args.lenient,
    });
    plan_or_run(cli.dry_run, &plan, || {
        let data = LabeledData64::load_csv(&data_path, args.lenient)?;
        let rule = QuadratureRule64::load(&rule_path)?;
        let kernel = load_kernel_spec(&kernel_path)?;
        let config = FitConfig64::new(lambda, rule.degree(), kernel)?;
        let est = wrls_fit(&data, &rule, &config)?;
        write_json(&out, &est.to_json())?;
        println!("fitted {} samples; estimator written to {}", data.len(), out.display());
        Ok(())
    })
}

fn dfit(cli: &Cli, cfg: &FileConfig, args: &DfitArgs, seed: u64) -> Result<(), CliError> {
    let groups = cfg.fill_vec(args.groups.clone(), "groups");
    if groups.is_empty() {
        return Err(CliError::usage("missing required flag --groups"));
    }
    let servers = require(cfg.fill(args.servers, "servers"), "servers")?;
    let mode = cfg.fill(args.mode.clone(), "mode").unwrap_or_else(|| "theoretical".into());
    let out = require(cfg.fill(args.out.clone(), "out"), "out")?;
    let plan = serde_json::json!({
        "command": "dfit", "groups": groups, "servers": servers, "mode": mode,
        "seed": seed, "out": out, "allow_partial": args.allow_partial,
    });
    plan_or_run(cli.dry_run, &plan, || {
        let data: Vec<LabeledData64> = groups
            .iter()
            .map(|p| LabeledData64::load_csv(p, args.lenient))
            .collect::<Result<_, _>>()?;
        let shard_data = if servers >= 10 {
            partition_rotation_groups(&data, servers, seed)?
        } else {
            partition_degenerate(&data, servers)?
        };
        let rule = match mode.as_str() {
            "theoretical" => {
                let gamma = require(cfg.fill(args.gamma, "gamma"), "gamma")?;
                ConfigRule::Theoretical { gamma }
            }
            "cv" => {
                let kernel_path = require(cfg.fill(args.kernel.clone(), "kernel"), "kernel")?;
                let base = cfg.fill(args.lambda_base, "lambda_base").unwrap_or(2);
                ConfigRule::CvRescaled {
                    kernel_grid: vec![load_kernel_spec(&kernel_path)?],
                    lambda_grid: geometric_lambda_grid::<f64>(base),
                    cv_train_cap: 500,
                    cv_holdout_cap: 250,
                    seed,
                    advisory_gamma: None,
                }
            }
            other => return Err(CliError::usage(format!("unknown mode '{other}' (theoretical|cv)"))),
        };
        let shards = per_shard_config(shard_data, 2, &rule)?;
        let global = dwrls_fit(&shards, args.allow_partial)?;
        write_json(&out, &global.to_json())?;
        println!(
            "aggregated {} servers over {} samples; global estimator written to {}",
            global.components().len(),
            global.total_samples(),
            out.display()
        );
        Ok(())
    })
}

fn eval(cli: &Cli, cfg: &FileConfig, args: &EvalArgs) -> Result<(), CliError> {
    let est_path = require(cfg.fill(args.estimator.clone(), "estimator"), "estimator")?;
    let points_path = require(cfg.fill(args.points.clone(), "points"), "points")?;
    let out = require(cfg.fill(args.out.clone(), "out"), "out")?;
    let plan = serde_json::json!({
        "command": "eval", "estimator": est_path, "points": points_path, "out": out,
    });
    plan_or_run(cli.dry_run, &plan, || {
        let text = std::fs::read_to_string(&est_path)
            .map_err(|e| CliError::io(format!("estimator {}: {e}", est_path.display())))?;
        let json: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("estimator {}: {e}", est_path.display())))?;
        let pts: PointSet64 = load_point_set(&points_path, args.lenient)?;
        // local estimators carry `coeffs`, global ones `components`
        let values: Vec<f64> = if json.get("components").is_some() {
            let est = GlobalEstimator64::from_json(&json).map_err(CliError::usage)?;
            est.evaluate_batch(pts.points())?
        } else {
            let est = LocalEstimator64::from_json(&json).map_err(CliError::usage)?;
            est.evaluate_batch(pts.points())?
        };
        let mut csv = String::from("x0,x1,x2,value\n");
        for (p, v) in pts.points().iter().zip(&values) {
            let c = p.coords();
            csv.push_str(&format!("{},{},{},{v}\n", c[0], c[1], c[2]));
        }
        std::fs::write(&out, csv).map_err(CliError::io)?;
        println!("evaluated {} points; values written to {}", values.len(), out.display());
        Ok(())
    })
}

fn simulate(cli: &Cli, cfg: &FileConfig, args: &SimulateArgs, seed: u64) -> Result<(), CliError> {
    let target_name = require(cfg.fill(args.target.clone(), "target"), "target")?;
    let design_file = cfg.fill(args.design_file.clone(), "design_file");
    let base_n = cfg.fill(args.base_n, "base_n").unwrap_or(1038);
    let m_list = cfg.fill_vec(args.m.clone(), "m");
    if m_list.is_empty() {
        return Err(CliError::usage("missing required flag --m"));
    }
    let seed_count = cfg.fill(args.seeds, "seeds").unwrap_or(5);
    let test_n = cfg.fill(args.test_n, "test_n").unwrap_or(10_000);
    let noise_sigma = cfg.fill(args.noise_sigma, "noise_sigma").unwrap_or(0.1);
    let cv_train_cap = cfg.fill(args.cv_train_cap, "cv_train_cap").unwrap_or(500);
    let cv_holdout_cap = cfg.fill(args.cv_holdout_cap, "cv_holdout_cap").unwrap_or(250);
    let out = require(cfg.fill(args.out.clone(), "out"), "out")?;

    let plan = serde_json::json!({
        "command": "simulate", "target": target_name, "design_file": design_file,
        "base_n": base_n, "m": m_list, "seeds": seed_count, "test_n": test_n,
        "noise_sigma": noise_sigma, "cv_train_cap": cv_train_cap,
        "cv_holdout_cap": cv_holdout_cap, "seed": seed, "out": out,
        "residuals": !args.no_residuals,
    });
    plan_or_run(cli.dry_run, &plan, || {
        let (target, kernel_grid, lambda_grid): (TargetFunction<f64>, Vec<Kernel64>, Vec<f64>) =
            match target_name.as_str() {
                "wendland" => (
                    TargetFunction::wendland_sum(10)?,
                    vec![Kernel64::wendland(2)?],
                    geometric_lambda_grid(2),
                ),
                "franke" => (
                    TargetFunction::franke(),
                    sigma_grid()
                        .into_iter()
                        .map(|s| Kernel64::gaussian_chordal(2, s))
                        .collect::<Result<_, _>>()?,
                    geometric_lambda_grid(3),
                ),
                other => {
                    return Err(CliError::usage(format!(
                        "unknown target '{other}' (wendland|franke)"
                    )))
                }
            };
        let base: PointSet64 = match &design_file {
            Some(path) => load_point_set(path, false)?,
            None => spherefit::geometry::fibonacci_points(base_n)?,
        };
        let test_points = spherefit::geometry::spiral_points(test_n)?;
        let sweep = SweepConfig {
            target,
            kernel_grid,
            lambda_grid,
            base_points: base,
            test_points,
            m_list,
            seeds: (0..seed_count).map(|i| seed.wrapping_add(i)).collect(),
            noise_sigma,
            cv_train_cap,
            cv_holdout_cap,
            capture_residuals: !args.no_residuals,
        };
        let result = run_sweep(&sweep)?;
        write_results(&result, &out)?;
        for (m, mean) in result.mean_rmse_by_m() {
            println!("m = {m}: mean testing RMSE {mean:.6}");
        }
        let failed: Vec<_> =
            result.cells.iter().filter(|c| c.error.is_some()).map(|c| (c.m, c.seed)).collect();
        if !failed.is_empty() {
            log::warn!("{} sweep cells failed: {failed:?}", failed.len());
        }
        println!("results written to {}", out.display());
        Ok(())
    })
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("JSON serializes");
    std::fs::write(path, text).map_err(CliError::io)
}
