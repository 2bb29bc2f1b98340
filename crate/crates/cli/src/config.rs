//! Model configuration files.
//!
//! A config is a TOML document; unknown keys anywhere are rejected.
//!
//! ```toml
//! schema_version = 1
//! name = "demo"                     # optional, used in plot titles
//! description = "..."               # optional
//!
//! [units]
//! position = "unit_interval"        # x in [0, 1]
//! potential = "dimensionless"
//! rate = "per_unit_time"
//!
//! [model]
//! regime = "bounded"                # bounded | strong | vanishing
//! normalization = "unit_at_origin"  # unit_at_origin | unit_mass
//!
//! [[potentials]]                    # one table per species, in index order
//! kind = "linear"                   # linear | cosine | lobed_cosine | sawtooth | shifted | samples
//! slope = 1.0
//!
//! [rates]
//! matrix = [[1.0, 1.0], [1.0, 1.0]] # constant nu_ij, row i, column j, diagonal included
//!
//! # or, for x-dependent rates, off-diagonal entries (1-based) with the
//! # diagonal derived from the column sums:
//! [[rates.entries]]
//! i = 1
//! j = 2
//! rate = { kind = "bump", lo = 0.65, hi = 0.8, height = 1.0 }
//! ```
//!
//! A single species may leave `[rates]` empty. Rates that fail validation
//! (diagonal not equal to the column outflow, or not bounded below where the
//! regime requires it) are input errors.

use std::fs;
use std::path::Path;

use motorlab::model::{
    validate_rates, ModelConfig, Normalization, PotentialSet, PotentialSpec, RateFunction, Regime,
    TransitionRates,
};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

const POSITION_UNITS: &[&str] = &["unit_interval"];
const POTENTIAL_UNITS: &[&str] = &["dimensionless"];
const RATE_UNITS: &[&str] = &["per_unit_time"];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    schema_version: u32,
    name: Option<String>,
    #[allow(dead_code)]
    description: Option<String>,
    units: Units,
    model: ModelSection,
    potentials: Vec<PotentialSpec>,
    #[serde(default)]
    rates: RatesSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Units {
    position: String,
    potential: String,
    rate: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    regime: Regime,
    normalization: Normalization,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RatesSection {
    matrix: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    entries: Vec<RateEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RateEntry {
    i: usize,
    j: usize,
    rate: RateFunction,
}

/// A parsed configuration with its identity.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub model: ModelConfig,
    pub name: String,
    /// First 12 hex digits of SHA-256 over the file bytes and any override.
    pub hash: String,
}

fn check_unit(field: &str, value: &str, allowed: &[&str]) -> CliResult<()> {
    if allowed.contains(&value) {
        Ok(())
    } else {
        Err(CliError::input(format!(
            "units.{field} = {value:?} is not supported (expected one of {allowed:?})"
        )))
    }
}

fn build_rates(
    section: RatesSection,
    species: usize,
    regime: Regime,
) -> CliResult<TransitionRates> {
    let rates = match (section.matrix, section.entries.is_empty()) {
        (Some(_), false) => {
            return Err(CliError::input(
                "rates: give either `matrix` or `entries`, not both",
            ))
        }
        (Some(m), true) => TransitionRates::from_constant_matrix(&m, regime)?,
        (None, false) => {
            let mut off = Vec::with_capacity(section.entries.len());
            for e in section.entries {
                if e.i == 0 || e.j == 0 {
                    return Err(CliError::input("rates.entries indices are 1-based"));
                }
                off.push(((e.i - 1, e.j - 1), e.rate));
            }
            TransitionRates::from_off_diagonal(species, off, regime)?
        }
        (None, true) if species == 1 => TransitionRates::single().with_regime(regime),
        (None, true) => {
            return Err(CliError::input(format!(
                "rates are required for {species} species"
            )))
        }
    };
    let report = validate_rates(&rates);
    if !report.is_valid() {
        let first = report.violations[0].to_string();
        return Err(CliError::input(format!(
            "rates rejected ({} violations, first: {first})",
            report.violations.len()
        ))
        .with_details(serde_json::to_value(&report).expect("report serializes")));
    }
    Ok(rates)
}

/// Parses config text; `regime_override` replaces `model.regime`.
pub fn parse_config(
    text: &str,
    regime_override: Option<Regime>,
) -> CliResult<(ModelConfig, Option<String>)> {
    let file: ConfigFile =
        toml::from_str(text).map_err(|e| CliError::input(format!("config: {}", e.message())))?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(CliError::input(format!(
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            file.schema_version
        )));
    }
    check_unit("position", &file.units.position, POSITION_UNITS)?;
    check_unit("potential", &file.units.potential, POTENTIAL_UNITS)?;
    check_unit("rate", &file.units.rate, RATE_UNITS)?;
    if file.potentials.is_empty() {
        return Err(CliError::input(
            "at least one [[potentials]] table is required",
        ));
    }
    let regime = regime_override.unwrap_or(file.model.regime);
    let species = file.potentials.len();
    let potentials = PotentialSet::from_specs(file.potentials)?;
    let rates = build_rates(file.rates, species, regime)?;
    let model = ModelConfig::new(potentials, rates, file.model.normalization)?;
    Ok((model, file.name))
}

/// Reads and parses a config file. A missing or unreadable file is an input
/// error, not an I/O error: the output side has not been touched yet.
pub fn load_config(path: &Path, regime_override: Option<Regime>) -> CliResult<LoadedConfig> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| CliError::input(format!("config {} is not UTF-8", path.display())))?;
    let (model, name) = parse_config(text, regime_override)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    if let Some(r) = regime_override {
        hasher.update(format!("\nregime_override={r}").as_bytes());
    }
    let hash = hasher
        .finalize()
        .iter()
        .take(6)
        .map(|b| format!("{b:02x}"))
        .collect();
    let name = name.unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "config".to_string())
    });
    Ok(LoadedConfig { model, name, hash })
}
