//! `asht`: train, evaluate and compare active hypothesis testing agents.
//!
//! Every failure ends with a single stderr line
//! `asht: error: <category>: <message>` and a nonzero exit status
//! (2 for usage errors, 1 otherwise).

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use asht_core::decoders::Target;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "asht", version, about = "Active sequential hypothesis testing agents")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Master seed; overrides the configuration's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Configuration file, pipeline preset or environment preset.
    #[arg(long, global = true)]
    pub config: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for episode-level parallelism.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Allow writing into an existing non-empty output directory.
    #[arg(long, global = true)]
    pub force: bool,
    /// Evaluate on 2000 episodes instead of the configured count.
    #[arg(long, global = true)]
    pub fast: bool,
    /// Include wall-clock seconds in reports (they are then not reproducible).
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the experiment-selection policy.
    TrainPolicy(TrainPolicyArgs),
    /// Generate a labeled sequence dataset (JSON lines).
    GenDataset(GenDatasetArgs),
    /// Train the monitor (error-probability regressor) on a dataset.
    TrainMonitor(TrainDecoderArgs),
    /// Train the inference classifier on a dataset.
    TrainInference(TrainDecoderArgs),
    /// Train policy, monitor and inference decoder, then evaluate.
    RunPipeline(RunPipelineArgs),
    /// Evaluate a trained or baseline agent.
    Eval(EvalArgs),
    /// Evaluate the Chernoff or random baseline.
    Baseline(BaselineArgs),
    /// Inference error against decoder training-set size.
    Sweep(SweepArgs),
    /// Check an environment file and print its dimensions.
    EnvValidate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Fixed,
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceArg {
    Chernoff,
    Policy,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AgentArg {
    Composite,
    Random,
    Chernoff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineAgentArg {
    Chernoff,
    Random,
}

#[derive(Debug, Args)]
pub struct TrainPolicyArgs {
    /// Training episodes (overrides the configuration).
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Episode horizon (defaults to T, or t_cap in sequential mode).
    #[arg(long = "T")]
    pub horizon: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GenDatasetArgs {
    #[arg(long, value_enum, default_value = "chernoff")]
    pub source: SourceArg,
    /// Policy checkpoint, required with `--source policy`.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "train")]
    pub side: SideArg,
    /// true_hypothesis, map_estimate, error_probability, confidence or
    /// log_likelihood_index.
    #[arg(long, default_value = "error_probability")]
    pub target: Target,
    #[arg(long, default_value_t = 20_000)]
    pub episodes: usize,
    #[arg(long, default_value_t = 1)]
    pub horizon_min: usize,
    #[arg(long, default_value_t = 50)]
    pub horizon_max: usize,
    #[arg(long, default_value_t = 0.1)]
    pub validation: f64,
    #[arg(long = "test-fraction", default_value_t = 0.0)]
    pub test_fraction: f64,
}

#[derive(Debug, Args)]
pub struct TrainDecoderArgs {
    /// Dataset file written by `gen-dataset`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RunPipelineArgs {
    /// Policy training episodes (overrides the configuration).
    #[arg(long)]
    pub episodes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_enum, default_value = "composite")]
    pub agent: AgentArg,
    /// Run directory holding policy.ckpt, inference.ckpt and optionally
    /// monitor.ckpt.
    #[arg(long)]
    pub run: Option<PathBuf>,
    #[arg(long)]
    pub policy: Option<PathBuf>,
    #[arg(long)]
    pub monitor: Option<PathBuf>,
    #[arg(long)]
    pub inference: Option<PathBuf>,
    #[command(flatten)]
    pub mode: ModeArgs,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long, value_enum, default_value = "chernoff")]
    pub agent: BaselineAgentArg,
    #[command(flatten)]
    pub mode: ModeArgs,
}

#[derive(Debug, Args)]
pub struct ModeArgs {
    #[arg(long, value_enum, default_value = "fixed")]
    pub mode: ModeArg,
    /// Horizons for fixed mode (comma separated).
    #[arg(long = "T", value_delimiter = ',')]
    pub horizons: Vec<usize>,
    /// Thresholds for sequential mode (comma separated).
    #[arg(long = "c", value_delimiter = ',')]
    pub thresholds: Vec<f64>,
    /// Step cap in sequential mode.
    #[arg(long = "t-cap", default_value_t = 50)]
    pub t_cap: usize,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long, value_enum, default_value = "test")]
    pub side: SideArg,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Trained policy checkpoint (or use `--run`).
    #[arg(long)]
    pub policy: Option<PathBuf>,
    #[arg(long)]
    pub run: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "100,1000,20000")]
    pub sizes: Vec<usize>,
    #[arg(long = "T", default_value_t = 25)]
    pub horizon: usize,
    /// Evaluation episodes per size.
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return fail(&CliError::Usage(clap_message(&e)));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.global.workers {
        if n == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    commands::dispatch(&cli.global, cli.command)
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("asht: error: {}: {}", e.category(), e.one_line());
    ExitCode::from(e.exit_code() as u8)
}

/// First line of a clap error without its own `error:` prefix.
fn clap_message(e: &clap::Error) -> String {
    let rendered = e.render().to_string();
    let first = rendered.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
    first.trim_start_matches("error:").trim().to_string()
}
