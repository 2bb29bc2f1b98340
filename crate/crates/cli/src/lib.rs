//! The `motorlab` command-line driver.
//!
//! Every command loads a TOML model config (schema in [`config`]), runs the
//! numerics of `motorlab-core`, and writes CSV, JSON and SVG artifacts from a
//! single writer once everything has been computed. Output names are
//! `<command>_<config name>_<config hash>_<sigma range or grid>.<ext>`.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind as ClapKind;
use clap::Parser;

use args::{Cli, Command};
pub use error::{CliError, CliResult, ErrorKind};

/// Parses `args` (program name first) and runs the command.
pub fn execute<I, T>(args: I) -> CliResult<Vec<PathBuf>>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::input(e.to_string().trim_end()))?;
    match &cli.command {
        Command::Solve {
            common,
            sigma,
            epsilon,
        } => commands::cmd_solve(common, *sigma, *epsilon),
        Command::Sweep { common, sigmas } => commands::cmd_sweep(common, &sigmas.0),
        Command::Limit { common } => commands::cmd_limit(common),
        Command::Report {
            common,
            sigma,
            epsilon,
        } => commands::cmd_report(common, *sigma, *epsilon),
    }
}

/// Runs the CLI and returns the exit status. Written files go to stdout, one
/// per line; failures go to stderr as JSON. `--help` and `--version` exit 0.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    if let Err(e) = Cli::try_parse_from(&args) {
        if matches!(e.kind(), ClapKind::DisplayHelp | ClapKind::DisplayVersion) {
            print!("{e}");
            return 0;
        }
    }
    match execute(args) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
