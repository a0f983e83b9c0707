//! Coordinator-side aggregation.
//!
//! This module is the privacy boundary of the divide-and-conquer scheme:
//! its only input type is [`EstimatorMessage`], which carries centers,
//! expansion coefficients, and a sample count. Raw outputs, noise values,
//! and quadrature weights are structurally absent, and nothing here
//! depends on the labeled-data types.

use rayon::prelude::*;

use crate::geometry::SpherePoint;
use crate::scalar::Real;
use crate::solver::{LocalEstimator, SolverError};

/// The one value a worker sends to the coordinator.
#[derive(Debug, Clone)]
pub struct EstimatorMessage<T> {
    pub server_id: usize,
    pub estimator: LocalEstimator<T>,
    pub sample_count: usize,
}

/// Size-weighted average of local estimators,
/// `f_bar = sum_j (|D_j| / |D|) f_j`.
#[derive(Debug, Clone)]
pub struct GlobalEstimator<T> {
    components: Vec<(T, LocalEstimator<T>)>,
    total_samples: usize,
}

/// Deterministic reduction of the received messages, ordered by server id
/// so the result is independent of arrival order.
pub fn aggregate_messages<T: Real>(mut messages: Vec<EstimatorMessage<T>>) -> GlobalEstimator<T> {
    assert!(!messages.is_empty(), "aggregation needs at least one message");
    messages.sort_by_key(|m| m.server_id);
    let total_samples: usize = messages.iter().map(|m| m.sample_count).sum();
    let total = T::of_usize(total_samples);
    let components = messages
        .into_iter()
        .map(|m| (T::of_usize(m.sample_count) / total, m.estimator))
        .collect();
    GlobalEstimator { components, total_samples }
}

impl<T: Real> GlobalEstimator<T> {
    pub fn components(&self) -> &[(T, LocalEstimator<T>)] {
        &self.components
    }

    pub fn total_samples(&self) -> usize {
        self.total_samples
    }

    /// `f_bar(x) = sum_j weight_j f_j(x)`.
    pub fn evaluate(&self, x: &SpherePoint<T>) -> Result<T, SolverError> {
        let mut acc = T::zero();
        for (w, est) in &self.components {
            acc += *w * est.evaluate(x)?;
        }
        Ok(acc)
    }

    /// Batch evaluation, parallel over components' center blocks.
    pub fn evaluate_batch(&self, pts: &[SpherePoint<T>]) -> Result<Vec<T>, SolverError> {
        let parts: Vec<Vec<T>> = self
            .components
            .par_iter()
            .map(|(w, est)| -> Result<Vec<T>, SolverError> {
                Ok(est.evaluate_batch(pts)?.into_iter().map(|v| v * *w).collect())
            })
            .collect::<Result<_, _>>()?;
        let mut out = vec![T::zero(); pts.len()];
        for part in parts {
            for (o, v) in out.iter_mut().zip(part) {
                *o += v;
            }
        }
        Ok(out)
    }

    /// JSON object `{total_samples, components: [{weight, estimator}, ...]}`.
    pub fn to_json(&self) -> serde_json::Value {
        let components: Vec<serde_json::Value> = self
            .components
            .iter()
            .map(|(w, est)| {
                serde_json::json!({
                    "weight": w.to_f64().unwrap_or(f64::NAN),
                    "estimator": est.to_json(),
                })
            })
            .collect();
        serde_json::json!({ "total_samples": self.total_samples, "components": components })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, String> {
        let total_samples =
            value["total_samples"].as_u64().ok_or("missing total_samples")? as usize;
        let comps = value["components"].as_array().ok_or("missing components")?;
        if comps.is_empty() {
            return Err("components must be nonempty".into());
        }
        let mut components = Vec::with_capacity(comps.len());
        for c in comps {
            let w = c["weight"].as_f64().ok_or("missing weight")?;
            let est = LocalEstimator::from_json(&c["estimator"])?;
            components.push((T::of(w), est));
        }
        Ok(Self { components, total_samples })
    }
}
