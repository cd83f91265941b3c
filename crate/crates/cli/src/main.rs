mod batch;
mod config;
mod update;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    /// The work ran but did not succeed.
    #[error("{0}")]
    Failed(String),
    /// A build or model backend could not be used.
    #[error("{0}")]
    Tool(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Failed(_) => 1,
            Self::Config(_) => 2,
            Self::Tool(_) => 3,
        }
    }
}

/// Updates unit tests after a focal method changes.
#[derive(Debug, Parser)]
#[command(name = "testmend", version)]
struct Cli {
    /// Print debug logs (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Update one test method in a project.
    Update(update::UpdateArgs),
    /// Evaluate a manifest of samples and write a report.
    Evaluate(batch::EvaluateArgs),
    /// Run one update against a live model, saving every exchange to a cassette.
    /// The project is left untouched.
    Record(update::RecordArgs),
    /// Print the error kinds found in a diagnostics file.
    Classify(batch::ClassifyArgs),
    /// Check a sample manifest.
    ValidateManifest(batch::ValidateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct LlmArgs {
    /// Profile name from the config file; in replay mode without a config,
    /// used as the model id.
    #[arg(long, value_name = "PROFILE")]
    pub llm: String,
    /// JSON file with LLM profiles and toolchain locations.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Serve model replies from this cassette only.
    #[arg(long, value_name = "FILE", conflicts_with = "record")]
    pub replay: Option<PathBuf>,
    /// Call the live profile and append every exchange to this cassette.
    #[arg(long, value_name = "FILE")]
    pub record: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    #[arg(long, default_value_t = 2, value_name = "N")]
    pub max_repairs: u32,
    /// Skip context collection.
    #[arg(long)]
    pub no_context: bool,
    /// Build once; no repair or fallback.
    #[arg(long)]
    pub no_refine: bool,
    /// Only repair the test, without enhancing it for the new behavior.
    #[arg(long)]
    pub repair_only: bool,
    /// Language server command, e.g. "jdtls -data /tmp/ws".
    #[arg(long, value_name = "CMD")]
    pub server: Option<String>,
    #[arg(long, default_value_t = 30, value_name = "SECS")]
    pub server_timeout: u64,
    /// Maven command, e.g. "./mvnw".
    #[arg(long, value_name = "CMD")]
    pub mvn: Option<String>,
    #[arg(long, default_value_t = 900, value_name = "SECS")]
    pub build_timeout: u64,
    /// Print machine-readable JSON.
    #[arg(long)]
    pub json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Update(args) => update::run_update(&args),
        Command::Record(args) => update::run_record(&args),
        Command::Evaluate(args) => batch::run_evaluate(&args),
        Command::Classify(args) => batch::run_classify(&args),
        Command::ValidateManifest(args) => batch::run_validate_manifest(&args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("testmend: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
