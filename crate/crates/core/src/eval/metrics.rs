use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{EvalError, RunRecord, SampleKey};
use crate::build::BuildStatus;
use crate::model::PipelineConfig;

/// Aggregates over one evaluation run. Percentages are in 0..=100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub records: Vec<RunRecord>,
    pub cpr: f64,
    pub tpr: f64,
    pub branch_cov: f64,
    pub line_cov: f64,
    pub config: PipelineConfig,
    /// Samples that could not be evaluated at all.
    #[serde(default)]
    pub errors: Vec<SampleError>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleError {
    pub sample: SampleKey,
    pub message: String,
}

impl EvalReport {
    /// True when some build could not be run or timed out.
    pub fn had_tool_errors(&self) -> bool {
        !self.errors.is_empty() || self.records.iter().any(|r| r.result.final_outcome.status.is_terminal_error())
    }
}

fn percent(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

/// Branch and line coverage of the focal class in percent, with samples
/// that did not pass counted as 0. A sample whose focal class has no
/// branches contributes no branch value.
fn coverage_points(record: &RunRecord) -> (Option<f64>, f64) {
    if !record.passed {
        return (Some(0.0), 0.0);
    }
    let Some(cov) = &record.coverage else {
        return (Some(0.0), 0.0);
    };
    let branch = cov.branch.and_then(|c| c.ratio()).map(|r| 100.0 * r);
    let line = cov.line.and_then(|c| c.ratio()).map_or(0.0, |r| 100.0 * r);
    (branch, line)
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CoverageMeans {
    pub branch: f64,
    pub line: f64,
    pub samples: usize,
}

fn coverage_means<'a>(records: impl IntoIterator<Item = &'a RunRecord>) -> CoverageMeans {
    let points: Vec<(Option<f64>, f64)> = records.into_iter().map(coverage_points).collect();
    CoverageMeans {
        branch: mean(points.iter().filter_map(|p| p.0)),
        line: mean(points.iter().map(|p| p.1)),
        samples: points.len(),
    }
}

/// CPR, TPR and overall coverage over `records`.
pub fn aggregate_metrics(records: Vec<RunRecord>, config: PipelineConfig) -> Result<EvalReport, EvalError> {
    if records.is_empty() {
        return Err(EvalError::NoRecords);
    }
    let n = records.len();
    let compiled = records.iter().filter(|r| r.compiled).count();
    let passed = records.iter().filter(|r| r.passed).count();
    let cov = coverage_means(&records);
    Ok(EvalReport {
        cpr: percent(compiled, n),
        tpr: percent(passed, n),
        branch_cov: cov.branch,
        line_cov: cov.line,
        records,
        config,
        errors: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointComparison {
    pub jointly_passed: Vec<SampleKey>,
    /// Means over the jointly passed samples; absent when there are none.
    pub joint: Option<(CoverageMeans, CoverageMeans)>,
    /// Means over the remaining samples, failures counted as 0.
    pub complement: (CoverageMeans, CoverageMeans),
}

/// Coverage of two systems compared over the samples both of them pass.
pub fn compare_jointly_passed(a: &[RunRecord], b: &[RunRecord]) -> Result<JointComparison, EvalError> {
    let index = |records: &[RunRecord]| -> Result<BTreeMap<SampleKey, usize>, EvalError> {
        let mut map = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            if map.insert(r.entry.key(), i).is_some() {
                return Err(EvalError::SampleSetMismatch(format!("{} appears twice", r.entry.key())));
            }
        }
        Ok(map)
    };
    let (ia, ib) = (index(a)?, index(b)?);
    if ia.keys().ne(ib.keys()) {
        let only: Vec<String> = ia
            .keys()
            .filter(|k| !ib.contains_key(*k))
            .chain(ib.keys().filter(|k| !ia.contains_key(*k)))
            .map(ToString::to_string)
            .collect();
        return Err(EvalError::SampleSetMismatch(format!("not in both: {}", only.join(", "))));
    }
    let jointly_passed: Vec<SampleKey> = ia
        .iter()
        .filter(|(k, i)| a[**i].passed && b[ib[*k]].passed)
        .map(|(k, _)| k.clone())
        .collect();
    let side = |records: &[RunRecord], idx: &BTreeMap<SampleKey, usize>, joint: bool| {
        coverage_means(
            idx.iter()
                .filter(|(k, _)| jointly_passed.contains(k) == joint)
                .map(|(_, i)| &records[*i]),
        )
    };
    let joint = (!jointly_passed.is_empty()).then(|| (side(a, &ia, true), side(b, &ib, true)));
    let complement = (side(a, &ia, false), side(b, &ib, false));
    Ok(JointComparison {
        jointly_passed,
        joint,
        complement,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub cpr: f64,
    pub tpr: f64,
    pub branch_cov: f64,
    pub line_cov: f64,
}

/// Per-run aggregates and their mean over repeated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiRunSummary {
    pub runs: Vec<RunSummary>,
    pub mean: RunSummary,
}

pub fn summarize_runs(reports: &[EvalReport]) -> MultiRunSummary {
    let runs: Vec<RunSummary> = reports
        .iter()
        .map(|r| RunSummary {
            cpr: r.cpr,
            tpr: r.tpr,
            branch_cov: r.branch_cov,
            line_cov: r.line_cov,
        })
        .collect();
    let mean = RunSummary {
        cpr: mean(runs.iter().map(|r| r.cpr)),
        tpr: mean(runs.iter().map(|r| r.tpr)),
        branch_cov: mean(runs.iter().map(|r| r.branch_cov)),
        line_cov: mean(runs.iter().map(|r| r.line_cov)),
    };
    MultiRunSummary { runs, mean }
}

/// Compile and pass flags for a final status.
pub fn status_flags(status: BuildStatus) -> (bool, bool) {
    (status.compiled(), status == BuildStatus::Passed)
}
