//! `trdiff <subcommand> --config <path> [--threads N]`
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure,
//! 3 validation-suite failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use trdiff::config::{CliError, Resolved, RunConfig};
use trdiff::{drivers, validate};

#[derive(Parser)]
#[command(
    name = "trdiff",
    version,
    about = "Time-resolved diffraction from laser-driven graphene"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Worker threads for momentum and sample maps (default: TRDIFF_THREADS
    /// or all cores). Outputs are identical for any value.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Band structure along the Gamma-K-M-Gamma path
    Bands(Common),
    /// Pump the target and store populations plus real-space snapshots
    Propagate(Common),
    /// Channel-decomposed Bragg-spot intensity traces
    Diffract(Common),
    /// Harmonic content of the diffraction traces
    Spectrum(Common),
    /// Run the cross-module invariant suite
    Validate(Common),
}

fn resolve_threads(cli_value: Option<usize>) -> Result<usize, CliError> {
    if let Some(n) = cli_value {
        return Ok(n);
    }
    match std::env::var("TRDIFF_THREADS") {
        Ok(text) => text.trim().parse().map_err(|_| {
            CliError::Config(format!(
                "TRDIFF_THREADS must be an integer (got \"{text}\")"
            ))
        }),
        Err(_) => Ok(0),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let threads = resolve_threads(cli.threads)?;
    let common = match &cli.cmd {
        Cmd::Bands(c)
        | Cmd::Propagate(c)
        | Cmd::Diffract(c)
        | Cmd::Spectrum(c)
        | Cmd::Validate(c) => c,
    };
    let resolved = Resolved::new(RunConfig::from_file(&common.config)?)?;
    let dir = resolved.write_echo()?;
    let pool = drivers::build_pool(threads)?;
    pool.install(|| match cli.cmd {
        Cmd::Bands(_) => drivers::cmd_bands(&resolved, &dir),
        Cmd::Propagate(_) => drivers::cmd_propagate(&resolved, &dir),
        Cmd::Diffract(_) => drivers::cmd_diffract(&resolved, &dir).map(|_| ()),
        Cmd::Spectrum(_) => drivers::cmd_spectrum(&resolved, &dir),
        Cmd::Validate(_) => validate::cmd_validate(&resolved),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("trdiff: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
