//! Error classification and the machine-readable failure format.
//!
//! Failures are serialized to stderr as one JSON object
//! `{code, module, message, context}` so sweeps and scripts can consume
//! them. Exit code 1 marks usage/input problems, 2 numerical failures.

use spherefit::distributed::DistributedError;
use spherefit::experiments::ExperimentError;
use spherefit::geometry::GeometryError;
use spherefit::kernels::KernelError;
use spherefit::quadrature::QuadratureError;
use spherefit::solver::SolverError;

#[derive(Debug)]
pub struct CliError {
    pub exit_code: i32,
    pub module: &'static str,
    pub code: &'static str,
    pub message: String,
    pub context: serde_json::Value,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            exit_code: 1,
            module: "cli",
            code: "usage",
            message: message.into(),
            context: serde_json::Value::Null,
        }
    }

    pub fn io(message: impl std::fmt::Display) -> Self {
        Self {
            exit_code: 1,
            module: "cli",
            code: "io",
            message: message.to_string(),
            context: serde_json::Value::Null,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "code": self.code,
            "module": self.module,
            "message": self.message,
            "context": self.context,
        })
    }
}

fn classify(module: &'static str, code: &'static str, exit_code: i32, message: String) -> CliError {
    CliError { exit_code, module, code, message, context: serde_json::Value::Null }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        let code = match &e {
            GeometryError::Io(_) | GeometryError::Parse { .. } => "io",
            GeometryError::NormOutOfTolerance { .. } => "norm_out_of_tolerance",
            _ => "geometry",
        };
        let exit = match &e {
            GeometryError::Io(_)
            | GeometryError::Parse { .. }
            | GeometryError::NormOutOfTolerance { .. }
            | GeometryError::BadCount(_) => 1,
            _ => 2,
        };
        classify("geometry", code, exit, e.to_string())
    }
}

impl From<QuadratureError> for CliError {
    fn from(e: QuadratureError) -> Self {
        let (code, exit) = match &e {
            QuadratureError::NoPositiveRule { .. } => ("no_positive_rule", 2),
            QuadratureError::TooFewNodes { .. } => ("too_few_nodes", 2),
            QuadratureError::Io(_) | QuadratureError::Parse { .. } => ("io", 1),
            QuadratureError::SidecarMissing(_) => ("sidecar_missing", 1),
            QuadratureError::Geometry(g) => return Self::from_geometry_nested(g, "quadrature"),
            _ => ("quadrature", 2),
        };
        let mut err = classify("quadrature", code, exit, e.to_string());
        if let QuadratureError::NoPositiveRule { residual, tolerance } = &e {
            err.context = serde_json::json!({ "residual": residual, "tolerance": tolerance });
        }
        err
    }
}

impl CliError {
    fn from_geometry_nested(e: &GeometryError, module: &'static str) -> Self {
        let mut err = Self::from(GeometryError::Parse { line: 0, reason: e.to_string() });
        err.module = module;
        err.message = e.to_string();
        err
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        let (code, exit) = match &e {
            SolverError::SolveFailure => ("solve_failure", 2),
            SolverError::Io(_) | SolverError::Parse { .. } => ("io", 1),
            SolverError::BadLambda(_) | SolverError::BadGamma { .. } | SolverError::EmptyGrid => {
                ("usage", 1)
            }
            _ => ("solver", 2),
        };
        classify("solver", code, exit, e.to_string())
    }
}

impl From<KernelError> for CliError {
    fn from(e: KernelError) -> Self {
        let exit = match &e {
            KernelError::BadFamily(_) | KernelError::MissingParameter { .. } => 1,
            _ => 2,
        };
        classify("kernels", "kernel", exit, e.to_string())
    }
}

impl From<DistributedError> for CliError {
    fn from(e: DistributedError) -> Self {
        let (code, exit) = match &e {
            DistributedError::ShardFailures(_) => ("shard_failures", 2),
            DistributedError::DegreeExceedsCapacity { .. } => ("degree_exceeds_capacity", 2),
            DistributedError::TooFewServers(_) | DistributedError::BadGroupCount(_) => ("usage", 1),
            _ => ("distributed", 2),
        };
        classify("distributed", code, exit, e.to_string())
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Geometry(g) => g.into(),
            ExperimentError::Quadrature(q) => q.into(),
            ExperimentError::Solver(s) => s.into(),
            ExperimentError::Kernel(k) => k.into(),
            ExperimentError::Distributed(d) => d.into(),
            ExperimentError::Io(io) => CliError::io(io),
            other => classify("experiments", "experiments", 2, other.to_string()),
        }
    }
}
