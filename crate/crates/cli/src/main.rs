//! Command-line front end: reproducible simulation, training, assessment,
//! estimation and bootstrap runs driven by one JSON config.
//!
//! Exit codes: 0 ok, 2 config or usage failure, 3 simulation failure,
//! 4 training divergence, 5 artifact mismatch (checkpoints, data files or
//! block labels that do not fit together).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Effective;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Simulation(String),
    Training(String),
    Artifact(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Simulation(_) => 3,
            CliError::Training(_) => 4,
            CliError::Artifact(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m)
            | CliError::Simulation(m)
            | CliError::Training(m)
            | CliError::Artifact(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "nbes",
    version,
    about = "Neural Bayes estimators: simulate, train, assess, estimate, bootstrap"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
pub struct Global {
    /// Experiment configuration, a single JSON document.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker pool size; results never depend on it.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Output directory; relative config paths resolve against it.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one replicate set and write it as a binary data file.
    Simulate(SimulateArgs),
    /// Train an estimator; writes a checkpoint and a run CSV.
    Train(TrainArgs),
    /// Compare estimators by Monte-Carlo risk on shared test data.
    Assess(AssessArgs),
    /// Apply a checkpoint to a data file.
    Estimate(EstimateArgs),
    /// Block-bootstrap confidence intervals for one data file.
    Bootstrap(BootstrapArgs),
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Generating parameter vector, comma separated.
    #[arg(
        long,
        value_name = "V1,V2,...",
        conflicts_with = "from_prior",
        allow_hyphen_values = true
    )]
    pub theta: Option<String>,
    /// Draw the generating parameters from the prior instead.
    #[arg(long)]
    pub from_prior: bool,
    /// Replicates in the set.
    #[arg(long, value_name = "M")]
    pub m: usize,
    /// Data file to write; defaults to the config data path.
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Checkpoint whose first sub-estimator provides the initial weights.
    #[arg(long, value_name = "DIR")]
    pub init_checkpoint: Option<PathBuf>,
}

#[derive(Args)]
pub struct AssessArgs {
    /// Checkpoint directories to assess.
    #[arg(required = true, value_name = "CKPT")]
    pub checkpoints: Vec<PathBuf>,
    /// Replicate counts on the risk grid, comma separated.
    #[arg(long, value_name = "M1,M2,...", default_value = "1,10,30")]
    pub m_grid: String,
    /// Losses to report, comma separated: absolute, squared, zero_one.
    #[arg(long, default_value = "absolute")]
    pub losses: String,
    /// Reference estimators to add: oracle, one_at_a_time, map, pmap.
    #[arg(long, value_name = "NAME")]
    pub baseline: Vec<String>,
    /// Test parameter draws.
    #[arg(long, value_name = "K", default_value_t = 500)]
    pub k_test: usize,
    /// Simulated data sets per test draw.
    #[arg(long, value_name = "J", default_value_t = 1)]
    pub sets_per_draw: usize,
}

#[derive(Args)]
pub struct EstimateArgs {
    /// Checkpoint directory.
    #[arg(value_name = "CKPT")]
    pub checkpoint: PathBuf,
    /// Data file.
    #[arg(value_name = "DATA")]
    pub data: PathBuf,
}

#[derive(Args)]
pub struct BootstrapArgs {
    /// Checkpoint directory.
    #[arg(value_name = "CKPT")]
    pub checkpoint: PathBuf,
    /// Data file.
    #[arg(value_name = "DATA")]
    pub data: PathBuf,
    /// Block labels, one integer per replicate; omit to treat replicates
    /// as independent blocks.
    #[arg(long, value_name = "FILE")]
    pub blocks: Option<PathBuf>,
    /// Bootstrap resamples.
    #[arg(long = "B", value_name = "B", default_value_t = nbes_core::assess::DEFAULT_RESAMPLES)]
    pub resamples: usize,
    /// Interval levels, comma separated.
    #[arg(long, default_value = "0.025,0.975")]
    pub levels: String,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let eff = Effective::load(&cli.global)?;
    let model = config::build_model(&eff.config).map_err(CliError::Config)?;
    eff.echo()?;
    match &cli.command {
        Command::Simulate(args) => commands::simulate(&eff, model.as_ref(), args),
        Command::Train(args) => commands::train_cmd(&eff, model.as_ref(), args),
        Command::Assess(args) => commands::assess(&eff, model.as_ref(), args),
        Command::Estimate(args) => commands::estimate(&eff, model.as_ref(), args),
        Command::Bootstrap(args) => commands::bootstrap(&eff, model.as_ref(), args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}
