mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand, ValueEnum};
use rabi_texp::{Error, Method, TrialKind};

#[derive(Debug, Clone, Parser)]
#[command(name = "rabi-texp", version, about = "t-expansion energies of the quantum Rabi model")]
#[command(args_override_self = true)]
pub struct Cli {
    /// key=value file with the same names as the flags; flags override it
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1.0)]
    pub omega0: f64,
    #[arg(long, global = true, default_value_t = 1.0)]
    pub omega: f64,
    #[arg(long, global = true)]
    pub g: Option<f64>,
    /// nonsym, pparity or nparity
    #[arg(long, global = true, default_value = "pparity")]
    pub kind: TrialKind,
    /// var, cmx or csm
    #[arg(long, global = true, default_value = "csm")]
    pub method: Method,
    #[arg(long, global = true, default_value_t = 6)]
    pub order: usize,
    #[arg(long, global = true, default_value_t = 0.0)]
    pub g_start: f64,
    #[arg(long, global = true, default_value_t = 1.0)]
    pub g_stop: f64,
    #[arg(long, global = true, default_value_t = 101)]
    pub g_count: usize,
    #[arg(
        long,
        global = true,
        value_delimiter = ',',
        action = ArgAction::Set,
        default_value = "0.05,0.1,0.2,0.5,1,2,5"
    )]
    pub omega_list: Vec<f64>,
    /// Worker threads for the per-g work
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Write to this file instead of stdout
    #[arg(long, global = true, value_name = "FILE")]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Also report the non-physical minima of a sweep
    #[arg(long, global = true)]
    pub blind_arms: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Table1,
    Table2,
    Fig3,
    Fig4,
    Fig5,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Optimized energy at a single coupling `--g`
    Estimate,
    /// Physical branch (and optionally blind arms) over the g grid
    Sweep,
    /// Oracle levels at `--g`
    Exact {
        #[arg(long, default_value_t = 4)]
        count: usize,
    },
    /// Regenerate a reference table or figure data set
    Reproduce { target: Target },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::NoPhysicalSolution(_) | Error::NoMinimumFound) => 2,
        Some(Error::NotConverged { .. }) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match config::expand(std::env::args_os().collect()).map(Cli::try_parse_from) {
        Ok(Ok(cli)) => cli,
        Ok(Err(err)) => err.exit(),
        Err(err) => {
            eprintln!("error: {err:#}");
            return ExitCode::from(1);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
