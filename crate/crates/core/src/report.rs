//! Machine-readable output: check records, suite summaries, and trajectory
//! files.
//!
//! Floats in CSV are written as `{:.16e}`, i.e. 17 significant digits, which
//! round-trips every `f64` exactly.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::dynamics::Params;
use crate::integrate::{Method, Trajectory};

/// One check result: `{check, inputs, residuals, tolerances, passed}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check: String,
    pub inputs: Map<String, Value>,
    pub residuals: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<Value>,
}

impl CheckRecord {
    pub fn new(check: &str, inputs: Map<String, Value>, passed: bool) -> Self {
        CheckRecord {
            check: check.to_string(),
            inputs,
            residuals: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            passed,
            decomposition: None,
        }
    }

    pub fn with_residuals<K: Into<String>>(mut self, items: impl IntoIterator<Item = (K, f64)>) -> Self {
        self.residuals.extend(items.into_iter().map(|(k, v)| (k.into(), v)));
        self
    }

    pub fn with_tolerances<K: Into<String>>(mut self, items: impl IntoIterator<Item = (K, f64)>) -> Self {
        self.tolerances.extend(items.into_iter().map(|(k, v)| (k.into(), v)));
        self
    }

    /// Largest residual, NaN if any residual is NaN.
    pub fn max_residual(&self) -> f64 {
        self.residuals
            .values()
            .fold(0.0, |acc: f64, &r| if r.is_nan() || acc.is_nan() { f64::NAN } else { acc.max(r) })
    }
}

/// Counts and per-residual maxima over a set of records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub failed_checks: Vec<String>,
    pub max_residuals: BTreeMap<String, f64>,
}

impl SuiteSummary {
    pub fn of(records: &[CheckRecord]) -> Self {
        let mut max_residuals: BTreeMap<String, f64> = BTreeMap::new();
        for rec in records {
            for (k, &v) in &rec.residuals {
                let slot = max_residuals.entry(k.clone()).or_insert(0.0);
                if v.is_nan() || *slot < v {
                    *slot = v;
                }
            }
        }
        let failed_checks: Vec<String> = records.iter().filter(|r| !r.passed).map(|r| r.check.clone()).collect();
        SuiteSummary {
            total: records.len(),
            passed: records.len() - failed_checks.len(),
            failed: failed_checks.len(),
            failed_checks,
            max_residuals,
        }
    }

    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

/// Writes `t,p1..pn,q1..qn,e`, one row per sample.
pub fn write_trajectory_csv<W: Write>(out: &mut W, traj: &Trajectory) -> io::Result<()> {
    let len = traj.first().y.len();
    let n = len / 2;
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("p{i}")));
    header.extend((1..=n).map(|i| format!("q{i}")));
    header.push("e".into());
    writeln!(out, "{}", header.join(","))?;
    for s in &traj.samples {
        write!(out, "{:.16e}", s.t)?;
        for x in s.y.iter() {
            write!(out, ",{x:.16e}")?;
        }
        writeln!(out, ",{:.16e}", s.e)?;
    }
    Ok(())
}

/// Run metadata stored alongside a JSON trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMetadata {
    pub method: Method,
    pub dt: f64,
    pub hamiltonian: String,
    pub params: Params,
    pub seed: u64,
    pub n: usize,
    pub t0: f64,
    pub t1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryJson {
    pub metadata: TrajectoryMetadata,
    pub t: Vec<f64>,
    /// Row per sample, `(p, q)` ordering.
    pub y: Vec<Vec<f64>>,
    pub e: Vec<f64>,
}

impl TrajectoryJson {
    pub fn new(metadata: TrajectoryMetadata, traj: &Trajectory) -> Self {
        TrajectoryJson {
            metadata,
            t: traj.samples.iter().map(|s| s.t).collect(),
            y: traj.samples.iter().map(|s| s.y.iter().copied().collect()).collect(),
            e: traj.samples.iter().map(|s| s.e).collect(),
        }
    }
}
