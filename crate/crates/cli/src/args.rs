use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use motorlab::analysis::DEFAULT_EPSILON;
use motorlab::model::Regime;

use crate::output::Formats;

/// Steady states of multi-species motor Fokker-Planck systems at small
/// diffusion, their phase functions and Hamilton-Jacobi limits.
///
/// Exit status: 0 success, 1 solver failure, 2 input error, 3 I/O error.
/// Failures print a JSON object `{"error": {...}}` on stderr.
#[derive(Debug, Parser)]
#[command(name = "motorlab", version, about, long_about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve at one sigma; write the solution CSV, diagnostics JSON and an SVG
    /// of the densities (or the phases when the densities underflow).
    Solve {
        #[command(flatten)]
        common: Common,
        /// Diffusion coefficient. Values below 0.05 are reached by continuation.
        #[arg(long, value_parser = parse_sigma)]
        sigma: f64,
        /// Radius of the origin neighbourhood for concentration masses.
        #[arg(long, default_value_t = DEFAULT_EPSILON, value_parser = parse_sigma)]
        epsilon: f64,
    },
    /// Continuation sweep over a descending sigma list, compared with the
    /// applicable limit; writes the convergence table and a log-log error plot.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated, strictly descending, e.g. `0.05,0.02,0.01`.
        #[arg(long, value_parser = parse_sigma_list)]
        sigmas: SigmaList,
    },
    /// Build the limit profile of the most specific applicable theorem (or the
    /// sign-constraint arrays for vanishing rates). Default grid: 2048 cells.
    Limit {
        #[command(flatten)]
        common: Common,
    },
    /// Motor-effect report at one sigma: JSON document plus an SVG dashboard.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_sigma)]
        sigma: f64,
        #[arg(long, default_value_t = DEFAULT_EPSILON, value_parser = parse_sigma)]
        epsilon: f64,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// Model configuration file (TOML, see the README for the schema).
    #[arg(long)]
    pub config: PathBuf,
    /// Number of grid cells. Default: max(512, ceil(8/sigma_min)).
    #[arg(long)]
    pub grid: Option<usize>,
    /// Output directory, created if missing.
    #[arg(long, env = "MOTORLAB_OUT", default_value = "motorlab-out")]
    pub out: PathBuf,
    /// Replace the regime given in the config.
    #[arg(long, value_enum)]
    pub regime_override: Option<RegimeArg>,
    /// Leave the generation time out of SVG files.
    #[arg(long)]
    pub no_timestamp: bool,
    /// Which artifacts to write.
    #[arg(long, value_enum, default_value_t = Format::All)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    Bounded,
    Strong,
    Vanishing,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Bounded => Regime::Bounded,
            RegimeArg::Strong => Regime::Strong,
            RegimeArg::Vanishing => Regime::Vanishing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Svg,
    All,
}

impl From<Format> for Formats {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => Formats {
                csv: true,
                json: false,
                svg: false,
            },
            Format::Json => Formats {
                csv: false,
                json: true,
                svg: false,
            },
            Format::Svg => Formats {
                csv: false,
                json: false,
                svg: true,
            },
            Format::All => Formats::ALL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaList(pub Vec<f64>);

fn parse_sigma(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("`{s}` is not a number"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` must be positive and finite"))
    }
}

fn parse_sigma_list(s: &str) -> Result<SigmaList, String> {
    let v = s
        .split(',')
        .map(parse_sigma)
        .collect::<Result<Vec<_>, _>>()?;
    if v.windows(2).any(|w| w[1] >= w[0]) {
        return Err("sigmas must be strictly descending".into());
    }
    Ok(SigmaList(v))
}
