use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::config::JobConfig;
use crate::error::{Error, Result};
use crate::estimator::{AmlsResult, Counterexamples, LevelTrace, LogEstimate, NaiveMcResult};

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Outcome {
    Estimate { log_estimate: f64, log10_estimate: f64 },
    /// The estimate fell below the probability floor (or nothing was hit).
    UnsatBelowThreshold,
    Diverged,
}

impl From<LogEstimate> for Outcome {
    fn from(e: LogEstimate) -> Self {
        match e {
            LogEstimate::Finite(v) => Outcome::Estimate {
                log_estimate: v,
                log10_estimate: e.log10(),
            },
            LogEstimate::Unsat => Outcome::UnsatBelowThreshold,
        }
    }
}

impl Outcome {
    pub fn log10(&self) -> Option<f64> {
        match self {
            Outcome::Estimate { log10_estimate, .. } => Some(*log10_estimate),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Amls,
    NaiveMc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaiveSummary {
    pub hits: u64,
    pub samples: u64,
    pub std_error: f64,
}

impl From<&NaiveMcResult> for NaiveSummary {
    fn from(r: &NaiveMcResult) -> Self {
        NaiveSummary {
            hits: r.hits,
            samples: r.samples,
            std_error: r.std_error(),
        }
    }
}

/// Everything needed to reproduce and plot one estimator run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: u32,
    pub estimator: EstimatorKind,
    pub problem: String,
    pub seed: u64,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_levels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<LevelTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub naive_mc: Option<NaiveSummary>,
    pub property_evaluations: u64,
    pub wall_time_secs: f64,
    /// Counterexample file name, relative to the report's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexamples: Option<String>,
    /// Resolved job configuration, defaults included.
    pub config: JobConfig,
}

impl RunReport {
    pub fn for_amls(problem: &str, config: JobConfig, result: &AmlsResult, wall_time_secs: f64) -> Self {
        RunReport {
            format_version: REPORT_FORMAT_VERSION,
            estimator: EstimatorKind::Amls,
            problem: problem.to_string(),
            seed: config.seed,
            outcome: result.log_estimate.into(),
            n_levels: Some(result.n_levels()),
            trace: Some(result.trace.clone()),
            naive_mc: None,
            property_evaluations: result.trace.property_evaluations,
            wall_time_secs,
            counterexamples: None,
            config,
        }
    }

    pub fn for_diverged(problem: &str, config: JobConfig, trace: &LevelTrace, wall_time_secs: f64) -> Self {
        RunReport {
            format_version: REPORT_FORMAT_VERSION,
            estimator: EstimatorKind::Amls,
            problem: problem.to_string(),
            seed: config.seed,
            outcome: Outcome::Diverged,
            n_levels: Some(trace.n_levels()),
            trace: Some(trace.clone()),
            naive_mc: None,
            property_evaluations: trace.property_evaluations,
            wall_time_secs,
            counterexamples: None,
            config,
        }
    }

    pub fn for_naive(problem: &str, config: JobConfig, result: &NaiveMcResult, wall_time_secs: f64) -> Self {
        RunReport {
            format_version: REPORT_FORMAT_VERSION,
            estimator: EstimatorKind::NaiveMc,
            problem: problem.to_string(),
            seed: config.seed,
            outcome: result.log_estimate.into(),
            n_levels: None,
            trace: None,
            naive_mc: Some(result.into()),
            property_evaluations: result.samples,
            wall_time_secs,
            counterexamples: None,
            config,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| Error::Json {
            path: "<report>".into(),
            source,
        })
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the final chains of a successful run: one sample per line,
/// whitespace-separated coordinates followed by the property value.
pub fn emit_counterexamples(result: &AmlsResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let ce = result.counterexamples.as_ref().ok_or_else(|| {
        Error::Usage("run did not reach the violation set; there are no counterexamples".into())
    })?;
    let mut out = String::new();
    for (row, value) in ce.points.rows().into_iter().zip(&ce.values) {
        for x in row {
            write!(out, "{x} ").expect("writing to a String");
        }
        writeln!(out, "{value}").expect("writing to a String");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_counterexamples(path: impl AsRef<Path>) -> Result<Counterexamples> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut flat = Vec::new();
    let mut values = Vec::new();
    let mut width = None;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let nums = line
            .split_whitespace()
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Usage(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        if nums.len() < 2 || width.is_some_and(|w| w != nums.len()) {
            return Err(Error::Usage(format!(
                "{}:{}: ragged counterexample row",
                path.display(),
                lineno + 1
            )));
        }
        width = Some(nums.len());
        let (value, point) = nums.split_last().expect("row has at least two entries");
        flat.extend_from_slice(point);
        values.push(*value);
    }
    let d = width.map_or(0, |w| w - 1);
    Ok(Counterexamples {
        points: Array2::from_shape_vec((values.len(), d), flat).expect("rows have equal width"),
        values,
    })
}
