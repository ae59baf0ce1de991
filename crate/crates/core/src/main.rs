//! Command-line front end for the co-design optimization toolkit.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use codesign_bo::cli::{parse_config, report_trace, run, Mode, Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "codesign-bo",
    about = "Batch Bayesian optimization for nested plant/controller co-design",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Path to the TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config's random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the batch size.
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Nested plant/controller co-design run.
    Codesign(CommonArgs),
    /// Standalone (batch) Bayesian optimization run.
    Bo(CommonArgs),
    /// Economies-of-scale cost table.
    Econ(CommonArgs),
    /// Single closed-loop simulator episode.
    Simulate(CommonArgs),
    /// Summarize an existing trace file.
    Report {
        /// Path to a trace.tsv produced by a previous run.
        trace: PathBuf,
        /// Output directory for the derived data files.
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
}

fn load(args: &CommonArgs, mode: Mode) -> Result<RunConfig, codesign_bo::cli::CliError> {
    let mut config = match &args.config {
        Some(path) => parse_config(path)?,
        None => RunConfig::default(),
    };
    config.mode = mode;
    let overrides = Overrides {
        seed: args.seed,
        out_dir: args.out.clone(),
        batch_size: args.batch_size,
    };
    overrides.apply(&mut config);
    config.validate()?;
    Ok(config)
}

fn execute(args: &CommonArgs, mode: Mode) -> ExitCode {
    let config = match load(args, mode) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(&config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Codesign(args) => execute(args, Mode::Codesign),
        Command::Bo(args) => execute(args, Mode::Bo),
        Command::Econ(args) => execute(args, Mode::Econ),
        Command::Simulate(args) => execute(args, Mode::Simulate),
        Command::Report { trace, out } => match report_trace(trace, out) {
            Ok(summary) => {
                print!("{summary}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
    }
}
