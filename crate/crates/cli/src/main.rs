use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hplatent::worldmodel::TrainMode;
use hplatent_cli::config::{resolve_out_dir, resolve_threads, CONFIG_SCHEMA};
use hplatent_cli::{run, Command, ExperimentConfig, RunOptions};

#[derive(Parser)]
#[command(name = "hplatent", version, about = "Learn hidden-parameter feature spaces from recurrent world models")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Experiment config (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides HPL_OUT_DIR and the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; overrides HPL_THREADS. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate training and evaluation datasets.
    GenData,
    /// Train world models (both modes unless --mode is given).
    Train {
        /// `standard` or `time-invariant`.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<TrainMode>,
    },
    /// Build the distance dataset and fit the embedding.
    Embed,
    /// Estimation curves, error ratios, feature exports and imagined sweeps.
    Eval,
    /// Run every step in order.
    All,
    /// Print the config JSON schema.
    Schema,
    /// Print the default config.
    DefaultConfig,
}

fn parse_mode(s: &str) -> Result<TrainMode, String> {
    s.parse().map_err(|e: hplatent::Error| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(1)
        }
    }
}

/// Writes to stdout; a closed pipe (`| head`) is not an error.
fn emit(text: &str) -> anyhow::Result<u8> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(0),
    }
}

fn execute(cli: Cli) -> anyhow::Result<u8> {
    let command = match cli.command {
        Cmd::Schema => return emit(CONFIG_SCHEMA),
        Cmd::DefaultConfig => return emit(&(serde_json::to_string_pretty(&ExperimentConfig::default())? + "\n")),
        Cmd::GenData => Command::GenData,
        Cmd::Train { mode } => Command::Train(mode),
        Cmd::Embed => Command::Embed,
        Cmd::Eval => Command::Eval,
        Cmd::All => Command::All,
    };
    let cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let opts = RunOptions {
        out_dir: resolve_out_dir(cli.out.as_deref(), &cfg),
        threads: resolve_threads(cli.threads)?,
        force: cli.force,
    };
    let status = run(command, &cfg, &opts)?;
    Ok(status.exit_code() as u8)
}
