//! Batch evaluation over a manifest of co-evolution samples.

mod manifest;
mod metrics;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use manifest::{load_manifest, parse_manifest, Category, ChangeKind, SampleKey, SampleManifestEntry, SchemaError};
pub use metrics::{
    aggregate_metrics, compare_jointly_passed, status_flags, summarize_runs, CoverageMeans, EvalReport,
    JointComparison, MultiRunSummary, RunSummary, SampleError,
};

use crate::build::{BuildRunner, ClassCoverage};
use crate::java::JavaSource;
use crate::llm::{CallRecord, Gateway, TokenUsage};
use crate::model::{MethodChange, ModelError, PipelineConfig, TestTarget};
use crate::pipeline::{run_pipeline, PipelineError, UpdateRequest};
use crate::refine::RefinementResult;
use crate::workspace::{SymbolIndex, WorkspaceSession};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("checkout failed: {0}")]
    Checkout(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("no records to aggregate")]
    NoRecords,
    #[error("record sets differ: {0}")]
    SampleSetMismatch(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub entry: SampleManifestEntry,
    pub result: RefinementResult,
    pub compiled: bool,
    pub passed: bool,
    /// Focal-class coverage, present only when the test compiled.
    pub coverage: Option<ClassCoverage>,
    pub llm_calls: usize,
    pub calls: Vec<CallRecord>,
    pub tokens: TokenUsage,
    pub wall_time: f64,
}

pub type BuilderFactory<'a> = dyn Fn(&SampleManifestEntry) -> Box<dyn BuildRunner> + Sync + 'a;

pub struct EvalEnv<'a> {
    /// Local clones, one directory per `repo`. Entries whose repo is not
    /// found here are cloned from `repo` as given.
    pub repos_dir: PathBuf,
    pub gateway: &'a Gateway,
    pub model_id: String,
    pub config: PipelineConfig,
    pub builder: &'a BuilderFactory<'a>,
    /// Language server command; without one only test-class fields are collected.
    pub server: Option<Vec<String>>,
    pub server_timeout: Duration,
    /// Keep the working copy of samples that did not pass.
    pub keep_failed: bool,
}

fn git(dir: &Path, args: &[&str]) -> Result<String, EvalError> {
    let out = Command::new("git")
        .arg("-C")
        .arg(dir)
        .args(args)
        .output()
        .map_err(|e| EvalError::Checkout(format!("cannot run git: {e}")))?;
    if !out.status.success() {
        return Err(EvalError::Checkout(format!(
            "git {}: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

/// `path` as of `revision` in the repository at `dir`.
pub fn file_at_revision(dir: &Path, revision: &str, path: &str) -> Result<String, EvalError> {
    git(dir, &["show", &format!("{revision}:{path}")])
}

/// Clones `source` into `dest` and checks out `revision`.
pub fn checkout(source: &str, dest: &Path, revision: &str) -> Result<(), EvalError> {
    let parent = dest.parent().unwrap_or_else(|| Path::new("."));
    let dest_str = dest.to_string_lossy();
    git(parent, &["clone", "--quiet", "--no-checkout", source, &dest_str])?;
    git(dest, &["checkout", "--quiet", "--detach", revision])?;
    Ok(())
}

fn focal_class_name(focal_text: &str) -> Option<String> {
    let src = JavaSource::parse(focal_text);
    let class = src.top_level_type()?.name.clone();
    Some(match src.package() {
        Some(p) if !p.name.is_empty() => format!("{}.{class}", p.name),
        _ => class,
    })
}

fn repo_source(env: &EvalEnv<'_>, repo: &str) -> String {
    let local = env.repos_dir.join(repo);
    if local.exists() {
        local.to_string_lossy().into_owned()
    } else {
        repo.to_owned()
    }
}

fn evaluate_in(entry: &SampleManifestEntry, env: &EvalEnv<'_>, work: &Path) -> Result<RunRecord, EvalError> {
    let started = Instant::now();
    checkout(&repo_source(env, &entry.repo), work, &entry.post_revision)?;
    let old_focal = file_at_revision(work, &entry.pre_revision, &entry.focal_file)?;
    let new_focal = std::fs::read_to_string(work.join(&entry.focal_file))?;
    let test_text = file_at_revision(work, &entry.pre_revision, &entry.test_file)?;
    std::fs::write(work.join(&entry.test_file), &test_text)?;
    let change = MethodChange::from_files(
        &entry.focal_file,
        &entry.focal_method,
        entry.focal_arity,
        &old_focal,
        &new_focal,
    )?;
    let target = TestTarget::locate(&entry.test_file, &test_text, &entry.test_method, entry.test_arity)?;

    let mut session = match &env.server {
        Some(cmd) if env.config.enable_context_collection => match WorkspaceSession::open(work, cmd, env.server_timeout) {
            Ok(s) => Some(s),
            Err(e) => {
                warn!("{}: no language server ({e})", entry.key());
                None
            }
        },
        _ => None,
    };
    let mut builder = (env.builder)(entry);
    let request = UpdateRequest {
        project_root: work,
        change: &change,
        target: &target,
        test_text: &test_text,
    };
    let index = session.as_mut().map(|s| s as &mut dyn SymbolIndex);
    let run = run_pipeline(request, index, builder.as_mut(), env.gateway, &env.model_id, &env.config);
    if let Some(s) = session {
        if let Err(e) = s.shutdown() {
            warn!("language server shutdown: {e}");
        }
    }
    let run = run?;
    let (compiled, passed) = status_flags(run.refinement.final_outcome.status);
    let coverage = if compiled {
        let class = focal_class_name(&new_focal);
        let report = run.refinement.final_outcome.coverage.as_ref();
        class.and_then(|c| report.and_then(|r| r.class(&c).cloned()))
    } else {
        None
    };
    Ok(RunRecord {
        entry: entry.clone(),
        compiled,
        passed,
        coverage,
        llm_calls: run.llm_calls(),
        tokens: run.token_usage,
        calls: run.calls,
        result: run.refinement,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

/// Evaluates one sample in a fresh working copy. The copy is deleted when
/// the updated test passes and kept otherwise if `env.keep_failed` is set.
pub fn evaluate_sample(entry: &SampleManifestEntry, env: &EvalEnv<'_>) -> Result<RunRecord, EvalError> {
    let scratch = tempfile::Builder::new().prefix("testmend-").tempdir()?;
    let work = scratch.path().join("work");
    let result = evaluate_in(entry, env, &work);
    if env.keep_failed && !matches!(&result, Ok(r) if r.passed) {
        let kept = scratch.keep();
        info!("{}: working copy kept at {}", entry.key(), kept.join("work").display());
    }
    result
}

/// Evaluates `entries` on up to `workers` threads. Results keep manifest order.
pub fn evaluate_all(
    entries: &[SampleManifestEntry],
    env: &EvalEnv<'_>,
    workers: usize,
) -> Vec<Result<RunRecord, EvalError>> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<RunRecord, EvalError>>>> = entries.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, entries.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(entry) = entries.get(i) else { break };
                info!("evaluating {}", entry.key());
                let result = evaluate_sample(entry, env);
                *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| {
            m.into_inner()
                .unwrap_or_else(|e| e.into_inner())
                .unwrap_or(Err(EvalError::NoRecords))
        })
        .collect()
}

/// Evaluates a manifest and aggregates the results. Samples that fail to
/// evaluate are listed in the report's errors.
pub fn run_evaluation(
    entries: &[SampleManifestEntry],
    env: &EvalEnv<'_>,
    workers: usize,
) -> Result<EvalReport, EvalError> {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (entry, result) in entries.iter().zip(evaluate_all(entries, env, workers)) {
        match result {
            Ok(r) => records.push(r),
            Err(e) => errors.push(SampleError {
                sample: entry.key(),
                message: e.to_string(),
            }),
        }
    }
    let mut report = match aggregate_metrics(records, env.config.clone()) {
        Ok(r) => r,
        Err(EvalError::NoRecords) if !errors.is_empty() => EvalReport {
            records: Vec::new(),
            cpr: 0.0,
            tpr: 0.0,
            branch_cov: 0.0,
            line_cov: 0.0,
            config: env.config.clone(),
            errors: Vec::new(),
        },
        Err(e) => return Err(e),
    };
    report.errors = errors;
    Ok(report)
}
