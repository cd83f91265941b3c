use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;
use testmend_core::build::{MavenRunner, Toolchain};
use testmend_core::llm::{Gateway, HttpTransport, LlmProfile};
use testmend_core::model::{InstructionSet, PipelineConfig};

use crate::{CliError, LlmArgs, PipelineArgs};

/// Contents of the `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub profiles: BTreeMap<String, LlmProfile>,
    #[serde(default)]
    pub java_homes: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub maven_homes: BTreeMap<String, PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Picks the backend: replay when a cassette is given, otherwise the
/// configured live profile (recording if asked). Returns the gateway and
/// the model id requests are made with.
pub fn gateway(args: &LlmArgs, config: &FileConfig) -> Result<(Gateway, String), CliError> {
    let profile = config.profiles.get(&args.llm);
    if let Some(path) = &args.replay {
        let model = profile.map_or_else(|| args.llm.clone(), |p| p.model.clone());
        let gateway = Gateway::replay_file(path).map_err(|e| CliError::Config(e.to_string()))?;
        return Ok((gateway, model));
    }
    let profile = profile.ok_or_else(|| {
        CliError::Config(format!(
            "no LLM profile `{}` configured; pass --replay FILE or a --config file defining it",
            args.llm
        ))
    })?;
    let transport = HttpTransport::from_profile(profile).map_err(|e| CliError::Config(e.to_string()))?;
    let gateway = match &args.record {
        Some(path) => Gateway::record(transport, Some(path)).map_err(|e| CliError::Config(e.to_string()))?,
        None => Gateway::live(transport),
    };
    Ok((gateway, profile.model.clone()))
}

pub fn pipeline_config(llm: &LlmArgs, args: &PipelineArgs) -> Result<PipelineConfig, CliError> {
    let config = PipelineConfig {
        max_repair_attempts: args.max_repairs,
        enable_context_collection: !args.no_context,
        enable_refinement: !args.no_refine,
        build_timeout: Duration::from_secs(args.build_timeout),
        llm_profile: llm.llm.clone(),
        instructions: if args.repair_only {
            InstructionSet::RepairOnly
        } else {
            InstructionSet::RepairEnhance
        },
        ..PipelineConfig::default()
    };
    config.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(config)
}

pub fn split_command(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

pub fn maven_runner(args: &PipelineArgs, config: &FileConfig, toolchain: Toolchain, coverage: bool) -> MavenRunner {
    let mut runner = MavenRunner {
        timeout: Duration::from_secs(args.build_timeout),
        toolchain,
        java_homes: config.java_homes.clone(),
        maven_homes: config.maven_homes.clone(),
        coverage,
        ..MavenRunner::default()
    };
    if let Some(mvn) = &args.mvn {
        runner.command = split_command(mvn);
    }
    runner
}
