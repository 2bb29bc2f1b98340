//! Potentials, transition rates, sign regions and the standing hypotheses.

pub mod assumptions;
pub mod config;
pub mod potential;
pub mod rates;
pub mod regions;

pub use assumptions::{
    check_assumptions, escape_failures, AssumptionReport, EscapeFailure, Theorem,
};
pub use config::{presets, ModelConfig, Normalization};
pub use potential::{Derivative, Potential, PotentialSet, PotentialSpec};
pub use rates::{
    validate_rates, RateFunction, RateViolation, Regime, TransitionRates, ValidationReport,
};
pub use regions::{
    decompose_regions, decompose_regions_with, sign_intervals, species_negative_sets, Interval,
    Region, RegionDecomposition, DETECTION_TOLERANCE,
};
