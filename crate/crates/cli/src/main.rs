//! `adaptp` command-line pipeline: corpus generation, prior fitting,
//! single-trajectory replay, evaluation, sweeps and the speed benchmark.

mod commands;
mod config;
mod fail;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use config::ConfigFile;

#[derive(Debug, Parser)]
#[command(name = "adaptp", version, about = "Adaptive climb/descent trajectory prediction")]
struct Cli {
    /// TOML file whose values override flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus with a day split.
    Gen(GenArgs),
    /// Fit surrogate models to a corpus split and write the prior set.
    Fit(FitArgs),
    /// Replay one trajectory through a filter and write per-blip diagnostics.
    Assimilate(AssimilateArgs),
    /// Score prediction methods on a corpus split.
    Evaluate(EvaluateArgs),
    /// Hyperparameter sweep over the Kalman grid or particle counts.
    Sweep(SweepArgs),
    /// Time performance-model integration against surrogate rollout.
    Bench(BenchArgs),
    /// Aircraft configuration files.
    #[command(subcommand)]
    Fleet(FleetCommand),
}

#[derive(Debug, Subcommand)]
enum FleetCommand {
    /// Write the built-in fleet and per-day counts as TOML.
    Export(FleetExportArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenArgs {
    /// Fleet TOML; the built-in fleet when absent.
    #[arg(long)]
    pub fleet: Option<PathBuf>,
    #[arg(long, default_value_t = 29)]
    pub days: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// default, zero or noise-free; `[jitter]` in the config refines it.
    #[arg(long, default_value = "default")]
    pub jitter_profile: String,
    /// Train, validation and test day fractions.
    #[arg(long, value_delimiter = ',', default_values_t = [0.7, 0.1, 0.2])]
    pub split_ratio: Vec<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitArgs {
    /// Corpus CSV; a `split.json` beside it defines the day split.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value = "train")]
    pub split: String,
    /// Prior set file; the fit log goes beside it.
    #[arg(long)]
    pub out: PathBuf,
    /// Fleet TOML used to place the crossover split.
    #[arg(long)]
    pub fleet: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssimilateArgs {
    /// Prior set; required for lwpf.
    #[arg(long)]
    pub prior: Option<PathBuf>,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub trajectory_id: String,
    /// lwpf or kf-tp.
    #[arg(long, default_value = "lwpf")]
    pub method: String,
    /// JSON-lines output.
    #[arg(long)]
    pub out: PathBuf,
    /// Leave the ensemble envelope out of each record.
    #[arg(long)]
    pub no_fan: bool,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateArgs {
    /// Prior set; required for lwpf.
    #[arg(long)]
    pub prior: Option<PathBuf>,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// `all` or a comma list of bada_t0, bada_reinit, kf_tp, lwpf.
    #[arg(long, default_value = "all")]
    pub methods: String,
    /// Report directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Fleet TOML for the performance-model baselines.
    #[arg(long)]
    pub fleet: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepArgs {
    /// kf or particles.
    #[arg(long)]
    pub what: String,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value = "val")]
    pub split: String,
    /// Prior set; required for the particle sweep.
    #[arg(long)]
    pub prior: Option<PathBuf>,
    /// Particle counts.
    #[arg(long, value_delimiter = ',', default_values_t = adaptp::eval::DEFAULT_PARTICLE_COUNTS)]
    pub counts: Vec<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchArgs {
    #[arg(long)]
    pub fleet: Option<PathBuf>,
    #[arg(long, default_value_t = 11)]
    pub reps: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Seeds the surrogate fits.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct FleetExportArgs {
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = ConfigFile::load(cli.config.as_deref()).and_then(|cfg| {
        let path = cli.config.as_deref();
        match cli.command {
            Command::Gen(a) => commands::gen(a, &cfg, path),
            Command::Fit(a) => commands::fit(a, &cfg, path),
            Command::Assimilate(a) => commands::assimilate(a, &cfg, path),
            Command::Evaluate(a) => commands::evaluate(a, &cfg, path),
            Command::Sweep(a) => commands::sweep(a, &cfg, path),
            Command::Bench(a) => commands::bench(a, &cfg, path),
            Command::Fleet(FleetCommand::Export(a)) => commands::fleet_export(a),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
