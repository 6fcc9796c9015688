//! Statistical verification engine.
//!
//! Each check produces a [`VerificationReport`] whose pass flag is
//! recomputable from `(estimate, target, std_error, threshold)`: the check
//! passes iff `|estimate − target| ≤ threshold·std_error`. Deterministic
//! checks set `std_error` so that the same rule applies (an exact
//! zero-tolerance check uses `std_error = 0`). Thresholds are in
//! standard-error units, so ensemble size stays a free parameter.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Outcome of one named statistical or deterministic check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    /// Pass margin in standard-error units.
    pub threshold: f64,
    pub n_samples: u64,
    pub pass: bool,
    pub details: BTreeMap<String, Value>,
}

impl VerificationReport {
    /// Build a report from an estimate of `target`; records the target in
    /// the details map and derives the pass flag.
    pub fn from_estimate(
        name: impl Into<String>,
        estimate: f64,
        target: f64,
        std_error: f64,
        threshold: f64,
        n_samples: u64,
    ) -> Self {
        let pass = (estimate - target).abs() <= threshold * std_error;
        let mut details = BTreeMap::new();
        details.insert("target".to_string(), json_f64(target));
        VerificationReport {
            name: name.into(),
            estimate,
            std_error,
            threshold,
            n_samples,
            pass,
            details,
        }
    }

    /// Deterministic check: passes only when `estimate == target` exactly
    /// (`std_error = 0`).
    pub fn exact(name: impl Into<String>, estimate: f64, target: f64, n_samples: u64) -> Self {
        Self::from_estimate(name, estimate, target, 1.0, 0.0, n_samples)
    }

    pub fn with_detail(mut self, key: &str, value: Value) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }

    pub fn with_f64_detail(self, key: &str, value: f64) -> Self {
        self.with_detail(key, json_f64(value))
    }
}

/// Finite f64 to JSON; non-finite values are stored as strings so reports
/// stay round-trippable.
pub(crate) fn json_f64(v: f64) -> Value {
    if v.is_finite() {
        serde_json::json!(v)
    } else {
        Value::String(format!("{v}"))
    }
}

/// Sample mean and its standard error.
pub(crate) fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
