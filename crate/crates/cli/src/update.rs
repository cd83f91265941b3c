use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::Args;
use log::warn;
use serde::Serialize;
use testmend_core::build::{BuildStatus, Toolchain};
use testmend_core::diff::compute_unified_diff;
use testmend_core::eval::file_at_revision;
use testmend_core::llm::TokenUsage;
use testmend_core::model::{MethodChange, PipelineConfig, TestTarget};
use testmend_core::pipeline::{run_pipeline, PipelineRun, UpdateRequest};
use testmend_core::refine::{write_atomic, TraceStep};
use testmend_core::workspace::{SymbolIndex, WorkspaceSession};

use crate::config::{gateway, maven_runner, pipeline_config, split_command, FileConfig};
use crate::{CliError, LlmArgs, PipelineArgs};

#[derive(Debug, Clone, Args)]
pub struct TargetArgs {
    #[arg(long, value_name = "DIR")]
    pub project: PathBuf,
    /// Focal source file, relative to the project.
    #[arg(long, value_name = "PATH")]
    pub focal_file: String,
    #[arg(long, value_name = "NAME")]
    pub focal_method: String,
    /// Parameter count of the updated focal method, for overloads.
    #[arg(long, value_name = "N")]
    pub focal_arity: Option<usize>,
    /// Focal file before the change.
    #[arg(long, value_name = "SRCFILE", required_unless_present = "old_rev", conflicts_with = "old_rev")]
    pub old: Option<PathBuf>,
    /// Git revision holding the focal file before the change.
    #[arg(long, value_name = "REV")]
    pub old_rev: Option<String>,
    /// Test file, relative to the project.
    #[arg(long, value_name = "PATH")]
    pub test_file: String,
    #[arg(long, value_name = "NAME")]
    pub test_method: String,
    #[arg(long, value_name = "N")]
    pub test_arity: Option<usize>,
}

#[derive(Debug, Args)]
pub struct UpdateArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[command(flatten)]
    pub llm: LlmArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Write the change as a unified diff here instead of editing the test file.
    #[arg(long, value_name = "PATCHFILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RecordArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long, value_name = "PROFILE")]
    pub llm: String,
    #[arg(long, value_name = "FILE")]
    pub config: PathBuf,
    /// Cassette to create or extend.
    #[arg(long, value_name = "FILE")]
    pub cassette: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Serialize)]
struct UpdateSummary<'a> {
    test_file: &'a str,
    status: BuildStatus,
    repair_attempts: u32,
    fallback_used: bool,
    llm_calls: usize,
    tokens: TokenUsage,
    context_components: usize,
    trace: &'a [TraceStep],
    #[serde(skip_serializing_if = "Option::is_none")]
    patch: Option<&'a Path>,
}

struct Prepared {
    change: MethodChange,
    target: TestTarget,
    test_text: String,
}

fn relative(project: &Path, path: &str) -> String {
    Path::new(path)
        .strip_prefix(project)
        .map(|p| p.to_string_lossy().into_owned())
        .unwrap_or_else(|_| path.to_owned())
}

fn prepare(args: &TargetArgs) -> Result<Prepared, CliError> {
    let project = &args.project;
    if !project.is_dir() {
        return Err(CliError::Config(format!("{} is not a directory", project.display())));
    }
    let focal_file = relative(project, &args.focal_file);
    let test_file = relative(project, &args.test_file);
    let read = |path: &Path| {
        fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
    };
    let new_focal = read(&project.join(&focal_file))?;
    let old_focal = match (&args.old, &args.old_rev) {
        (Some(old), _) => read(old)?,
        (None, Some(rev)) => {
            file_at_revision(project, rev, &focal_file).map_err(|e| CliError::Config(e.to_string()))?
        }
        (None, None) => return Err(CliError::Config("one of --old or --old-rev is required".into())),
    };
    let test_text = read(&project.join(&test_file))?;
    let change = MethodChange::from_files(&focal_file, &args.focal_method, args.focal_arity, &old_focal, &new_focal)
        .map_err(|e| CliError::Config(format!("{focal_file}: {e}")))?;
    let target = TestTarget::locate(&test_file, &test_text, &args.test_method, args.test_arity)
        .map_err(|e| CliError::Config(format!("{test_file}: {e}")))?;
    Ok(Prepared {
        change,
        target,
        test_text,
    })
}

fn execute(
    args: &TargetArgs,
    pipeline: &PipelineArgs,
    llm: &LlmArgs,
    file_config: &FileConfig,
    config: &PipelineConfig,
    prepared: &Prepared,
) -> Result<PipelineRun, CliError> {
    let (gateway, model_id) = gateway(llm, file_config)?;
    let mut session = match &pipeline.server {
        Some(cmd) if config.enable_context_collection => {
            match WorkspaceSession::open(&args.project, &split_command(cmd), Duration::from_secs(pipeline.server_timeout)) {
                Ok(s) => Some(s),
                Err(e) => {
                    warn!("continuing without a language server: {e}");
                    None
                }
            }
        }
        _ => None,
    };
    let mut builder = maven_runner(pipeline, file_config, Toolchain::default(), false);
    let request = UpdateRequest {
        project_root: &args.project,
        change: &prepared.change,
        target: &prepared.target,
        test_text: &prepared.test_text,
    };
    let index = session.as_mut().map(|s| s as &mut dyn SymbolIndex);
    let run = run_pipeline(request, index, &mut builder, &gateway, &model_id, config);
    if let Some(s) = session {
        if let Err(e) = s.shutdown() {
            warn!("language server shutdown: {e}");
        }
    }
    run.map_err(|e| CliError::Tool(e.to_string()))
}

fn restore(path: &Path, text: &str) -> Result<(), CliError> {
    write_atomic(path, text).map_err(|e| CliError::Tool(format!("cannot restore {}: {e}", path.display())))
}

fn print_summary(summary: &UpdateSummary<'_>, json: bool) {
    if json {
        println!("{}", serde_json::to_string_pretty(summary).expect("summary serializes"));
        return;
    }
    println!("test file:       {}", summary.test_file);
    println!("final status:    {:?}", summary.status);
    println!("repair attempts: {}", summary.repair_attempts);
    println!("fallback used:   {}", if summary.fallback_used { "yes" } else { "no" });
    println!("llm calls:       {}", summary.llm_calls);
    println!(
        "tokens:          {} (prompt {}, completion {})",
        summary.tokens.total(),
        summary.tokens.prompt,
        summary.tokens.completion
    );
    for (i, step) in summary.trace.iter().enumerate() {
        let built = if step.build_invoked { "" } else { " (not built)" };
        println!("  {}. {:?} -> {:?}{built}", i + 1, step.origin, step.status);
    }
    if let Some(patch) = summary.patch {
        println!("patch written to {}", patch.display());
    }
}

fn exit_code(status: BuildStatus) -> u8 {
    match status {
        BuildStatus::Passed => 0,
        s if s.is_terminal_error() => 3,
        _ => 1,
    }
}

pub fn run_update(args: &UpdateArgs) -> Result<u8, CliError> {
    let file_config = FileConfig::load(args.llm.config.as_deref())?;
    let config = pipeline_config(&args.llm, &args.pipeline)?;
    let prepared = prepare(&args.target)?;
    let test_path = args.target.project.join(&prepared.target.test_file);

    let run = match execute(&args.target, &args.pipeline, &args.llm, &file_config, &config, &prepared) {
        Ok(run) => run,
        Err(e) => {
            restore(&test_path, &prepared.test_text)?;
            return Err(e);
        }
    };
    let result = &run.refinement;
    let patch = match &args.out {
        Some(out) => {
            restore(&test_path, &prepared.test_text)?;
            let label = prepared.target.test_file.to_string_lossy();
            let diff = compute_unified_diff(&prepared.test_text, &result.final_file_text);
            fs::write(out, diff.render_patch(&format!("a/{label}"), &format!("b/{label}")))
                .map_err(|e| CliError::Config(format!("cannot write {}: {e}", out.display())))?;
            Some(out.as_path())
        }
        None => {
            restore(&test_path, &result.final_file_text)?;
            None
        }
    };
    let test_file = prepared.target.test_file.to_string_lossy();
    print_summary(
        &UpdateSummary {
            test_file: &test_file,
            status: result.final_outcome.status,
            repair_attempts: result.repair_attempts,
            fallback_used: result.fallback_used,
            llm_calls: run.llm_calls(),
            tokens: run.token_usage,
            context_components: run.context.components.len(),
            trace: &result.trace,
            patch,
        },
        args.pipeline.json,
    );
    Ok(exit_code(result.final_outcome.status))
}

pub fn run_record(args: &RecordArgs) -> Result<u8, CliError> {
    let llm = LlmArgs {
        llm: args.llm.clone(),
        config: Some(args.config.clone()),
        replay: None,
        record: Some(args.cassette.clone()),
    };
    let file_config = FileConfig::load(llm.config.as_deref())?;
    let config = pipeline_config(&llm, &args.pipeline)?;
    let prepared = prepare(&args.target)?;
    let test_path = args.target.project.join(&prepared.target.test_file);
    let run = execute(&args.target, &args.pipeline, &llm, &file_config, &config, &prepared);
    restore(&test_path, &prepared.test_text)?;
    let run = run?;
    let result = &run.refinement;
    let test_file = prepared.target.test_file.to_string_lossy();
    print_summary(
        &UpdateSummary {
            test_file: &test_file,
            status: result.final_outcome.status,
            repair_attempts: result.repair_attempts,
            fallback_used: result.fallback_used,
            llm_calls: run.llm_calls(),
            tokens: run.token_usage,
            context_components: run.context.components.len(),
            trace: &result.trace,
            patch: None,
        },
        args.pipeline.json,
    );
    if !args.pipeline.json {
        println!("cassette: {}", args.cassette.display());
    }
    Ok(exit_code(result.final_outcome.status))
}
