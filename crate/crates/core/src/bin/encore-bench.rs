use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use encore::bench::{self, Command, RunConfig};

/// Scenario-based trajectory benchmark harness.
///
/// Any setting from the config file can be overridden with `--key value`.
#[derive(Parser)]
#[command(name = "encore-bench", version)]
struct Cli {
    /// generate | partition | train | eval | report | ablate
    command: String,
    /// INI file with settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `--key value` overrides.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

fn run(cli: Cli) -> encore::Result<()> {
    let command: Command = cli.command.parse()?;
    bench::configure_threads()?;
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    for path in bench::run(command, &cfg)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", bench::error_line(&e));
            ExitCode::FAILURE
        }
    }
}
