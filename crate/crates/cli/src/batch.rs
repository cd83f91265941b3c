use std::fs;
use std::path::PathBuf;
use std::time::Duration;

use clap::Args;
use serde::Serialize;
use testmend_core::build::{parse_diagnostics, BuildRunner, Toolchain};
use testmend_core::eval::{load_manifest, run_evaluation, EvalEnv, SampleManifestEntry, SchemaError};
use testmend_core::refine::{classify_diagnostic, parse_corpus, ErrorKind};

use crate::config::{gateway, maven_runner, pipeline_config, split_command, FileConfig};
use crate::{CliError, LlmArgs, PipelineArgs};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// JSON-lines sample manifest.
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    /// Directory with one local clone per manifest `repo`.
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub repos: PathBuf,
    #[arg(long, default_value_t = 1, value_name = "N")]
    pub workers: usize,
    /// Where to write the report; stdout when absent.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// Keep working copies of samples that did not pass.
    #[arg(long)]
    pub keep_failed: bool,
    #[command(flatten)]
    pub llm: LlmArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Labeled corpus (`### kind:` blocks) or a raw Maven build log.
    pub file: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub manifest: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Serialize)]
struct EvalSummary {
    samples: usize,
    failed_to_run: usize,
    cpr: f64,
    tpr: f64,
    branch_cov: f64,
    line_cov: f64,
}

pub fn run_evaluate(args: &EvaluateArgs) -> Result<u8, CliError> {
    let file_config = FileConfig::load(args.llm.config.as_deref())?;
    let config = pipeline_config(&args.llm, &args.pipeline)?;
    let entries = load_manifest(&args.manifest).map_err(|e| CliError::Config(format!("{}: {e}", args.manifest.display())))?;
    let (gateway, model_id) = gateway(&args.llm, &file_config)?;
    let builder = |entry: &SampleManifestEntry| -> Box<dyn BuildRunner> {
        let toolchain = Toolchain {
            jdk_version: Some(entry.jdk_version.clone()),
            build_tool_version: Some(entry.build_tool_version.clone()),
        };
        Box::new(maven_runner(&args.pipeline, &file_config, toolchain, true))
    };
    let env = EvalEnv {
        repos_dir: args.repos.clone(),
        gateway: &gateway,
        model_id,
        config,
        builder: &builder,
        server: args.pipeline.server.as_deref().map(split_command),
        server_timeout: Duration::from_secs(args.pipeline.server_timeout),
        keep_failed: args.keep_failed,
    };
    let report = run_evaluation(&entries, &env, args.workers).map_err(|e| CliError::Tool(e.to_string()))?;
    let full = serde_json::to_string_pretty(&report).expect("report serializes");
    let summary = EvalSummary {
        samples: report.records.len(),
        failed_to_run: report.errors.len(),
        cpr: report.cpr,
        tpr: report.tpr,
        branch_cov: report.branch_cov,
        line_cov: report.line_cov,
    };
    match &args.report {
        Some(path) => {
            fs::write(path, full).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
            if args.pipeline.json {
                println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            }
        }
        None if args.pipeline.json => println!("{full}"),
        None => {}
    }
    if !args.pipeline.json {
        println!("samples:      {}", summary.samples);
        println!("not run:      {}", summary.failed_to_run);
        println!("compile rate: {:.1}%", summary.cpr);
        println!("pass rate:    {:.1}%", summary.tpr);
        println!("branch cov:   {:.1}%", summary.branch_cov);
        println!("line cov:     {:.1}%", summary.line_cov);
        for e in &report.errors {
            println!("error: {}: {}", e.sample, e.message);
        }
    }
    Ok(if report.had_tool_errors() { 3 } else { 0 })
}

#[derive(Debug, Serialize)]
struct Classified {
    line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    error: ErrorKind,
}

pub fn run_classify(args: &ClassifyArgs) -> Result<u8, CliError> {
    let text = fs::read_to_string(&args.file)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.file.display())))?;
    let is_corpus = text.lines().any(|l| l.starts_with("### kind:"));
    let items: Vec<Classified> = if is_corpus {
        parse_corpus(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", args.file.display())))?
            .into_iter()
            .map(|entry| Classified {
                line: Some(entry.line),
                error: entry.input.classify(),
                label: Some(entry.label),
            })
            .collect()
    } else {
        parse_diagnostics(&text)
            .iter()
            .map(|d| Classified {
                line: None,
                label: None,
                error: classify_diagnostic(d),
            })
            .collect()
    };
    let mismatches = items
        .iter()
        .filter(|c| c.label.as_deref().is_some_and(|l| l != c.error.label()))
        .count();
    if args.json {
        println!("{}", serde_json::to_string_pretty(&items).expect("kinds serialize"));
    } else {
        for c in &items {
            let at = c.line.map(|l| format!("line {l}: ")).unwrap_or_default();
            match &c.label {
                Some(label) if label != c.error.label() => {
                    println!("{at}{} (labeled {label})", c.error.label())
                }
                _ => println!("{at}{}", c.error.label()),
            }
        }
        if is_corpus {
            println!("{}/{} agree with their labels", items.len() - mismatches, items.len());
        }
    }
    Ok(if mismatches == 0 { 0 } else { 1 })
}

#[derive(Debug, Serialize)]
struct Validation {
    valid: bool,
    samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

pub fn run_validate_manifest(args: &ValidateArgs) -> Result<u8, CliError> {
    let outcome = load_manifest(&args.manifest);
    let report = match &outcome {
        Ok(entries) => Validation {
            valid: true,
            samples: entries.len(),
            line: None,
            error: None,
        },
        Err(e) => Validation {
            valid: false,
            samples: 0,
            line: match e {
                SchemaError::Invalid { line, .. } | SchemaError::Duplicate { line, .. } => Some(*line),
                SchemaError::Read(_) => None,
            },
            error: Some(e.to_string()),
        },
    };
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("validation serializes"));
    } else if let Some(error) = &report.error {
        eprintln!("{}: {error}", args.manifest.display());
    } else {
        println!("{}: {} samples", args.manifest.display(), report.samples);
    }
    Ok(if report.valid { 0 } else { 1 })
}
