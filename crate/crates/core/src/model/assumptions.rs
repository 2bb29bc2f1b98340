//! Sampled checks of the standing hypotheses and the limit theorems they enable.

use serde::Serialize;

use super::config::ModelConfig;
use super::rates::{validate_rates, Regime};
use super::regions::{decompose_regions, species_negative_sets, Interval, RegionDecomposition};

const SAMPLES: usize = 4096;

/// Limit results a configuration may qualify for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    /// `R′ = min_i (ψ′_i)_+` everywhere.
    MinPlus,
    /// Three-branch slope formula over `J`, `K` and the neutral set.
    Piecewise,
    /// Strong coupling: lower bounds on `R′` from the effective Hamiltonian.
    StrongCoupling,
    /// Vanishing rates: per-species sign constraints.
    VanishingRates,
}

/// A negative-slope interval of one species that no other species can rescue.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EscapeFailure {
    /// Zero-based species whose slope is negative on `interval`.
    pub species: usize,
    pub interval: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    /// `ν_ii = Σ_{j≠i} ν_ji` at every sample.
    pub rates_consistent: bool,
    /// `ν_ij ≥ k > 0` for `i ≠ j`.
    pub rates_bounded_below: bool,
    pub lower_bound_k: f64,
    /// Every `ψ_i ∈ C^{2,1}`.
    pub potentials_regular: bool,
    /// `∪J` is nonempty.
    pub j_nonempty: bool,
    /// `max_i ψ′_i > 0` on all of `[0, 1]`.
    pub max_slope_positive: bool,
    /// First sample where `max_i ψ′_i ≤ 0`, if any.
    pub max_slope_fails_at: Option<f64>,
    /// `K` and the neutral set are finite unions, stable under sample refinement.
    pub finite_sign_structure: bool,
    /// Each species' descent intervals end where some rising species feeds
    /// from it. Only evaluated in the vanishing regime.
    pub vanishing_escape: Option<bool>,
    pub escape_failures: Vec<EscapeFailure>,
    /// `min_i ψ′_i(0) > 0`.
    pub min_slope_at_origin_positive: bool,
    /// `0` is the left endpoint of `J_1`.
    pub origin_starts_j: bool,
    pub regime: Regime,
    pub species_count: usize,
    pub applicable: Vec<Theorem>,
}

impl AssumptionReport {
    pub fn applies(&self, t: Theorem) -> bool {
        self.applicable.contains(&t)
    }

    /// The most specific applicable theorem for profile construction.
    pub fn primary_theorem(&self) -> Option<Theorem> {
        [
            Theorem::StrongCoupling,
            Theorem::VanishingRates,
            Theorem::MinPlus,
            Theorem::Piecewise,
        ]
        .into_iter()
        .find(|t| self.applies(*t))
    }
}

/// Checks every hypothesis on a sampled grid.
pub fn check_assumptions(config: &ModelConfig, regions: &RegionDecomposition) -> AssumptionReport {
    let pot = &config.potentials;
    let rates = &config.rates;
    let n = config.species_count();
    let tol = regions.detection_tolerance;

    let validation = validate_rates(rates);
    let rates_consistent = !validation
        .violations
        .iter()
        .any(|v| matches!(v, super::rates::RateViolation::DiagonalMismatch { .. }));
    let rates_bounded_below = n == 1 || rates.lower_bound_k() > 0.0;

    let max_slope_fails_at = (0..=SAMPLES)
        .map(|k| k as f64 / SAMPLES as f64)
        .find(|&x| !(pot.max_slope(x).0 > tol));
    let max_slope_positive = max_slope_fails_at.is_none();

    let finer = decompose_regions(pot, 2 * SAMPLES);
    let coarse = decompose_regions(pot, SAMPLES);
    let finite_sign_structure = finer.j_intervals.len() == coarse.j_intervals.len()
        && finer.k_intervals.len() == coarse.k_intervals.len()
        && finer.neutral_set.len() == coarse.neutral_set.len();

    let (vanishing_escape, escape_failures) = if rates.regime() == Regime::Vanishing {
        let failures = escape_failures(config, tol);
        (Some(failures.is_empty()), failures)
    } else {
        (None, Vec::new())
    };

    let j_nonempty = !regions.j_intervals.is_empty();
    let potentials_regular = pot.all_c21();
    let base = rates_consistent && potentials_regular && j_nonempty;

    let mut applicable = Vec::new();
    match rates.regime() {
        Regime::Bounded => {
            if base && rates_bounded_below {
                if max_slope_positive {
                    applicable.push(Theorem::MinPlus);
                }
                if finite_sign_structure {
                    applicable.push(Theorem::Piecewise);
                }
            }
        }
        Regime::Strong => {
            if base && rates_bounded_below && max_slope_positive && n == 2 {
                applicable.push(Theorem::StrongCoupling);
            }
        }
        Regime::Vanishing => {
            if base && max_slope_positive && vanishing_escape == Some(true) {
                applicable.push(Theorem::VanishingRates);
            }
        }
    }

    AssumptionReport {
        rates_consistent,
        rates_bounded_below,
        lower_bound_k: rates.lower_bound_k(),
        potentials_regular,
        j_nonempty,
        max_slope_positive,
        max_slope_fails_at,
        finite_sign_structure,
        vanishing_escape,
        escape_failures,
        min_slope_at_origin_positive: pot.min_slope(0.0).0 > tol,
        origin_starts_j: regions.j_intervals.first().is_some_and(|iv| iv.lo == 0.0),
        regime: rates.regime(),
        species_count: n,
        applicable,
    }
}

/// Negative-slope intervals `K_j^α` lacking a species `i` with `ψ′_i ≥ 0` on
/// them and `ν_ij > 0` just left of their right endpoint.
pub fn escape_failures(config: &ModelConfig, tol: f64) -> Vec<EscapeFailure> {
    let pot = &config.potentials;
    let n = config.species_count();
    let mut out = Vec::new();
    for j in 0..n {
        for iv in species_negative_sets(pot, j, SAMPLES) {
            let rescued = (0..n).filter(|&i| i != j).any(|i| {
                let nonneg = (0..=256)
                    .map(|k| iv.lo + iv.len() * k as f64 / 256.0)
                    .all(|x| pot.get(i).slope(x) >= -tol);
                let feeds = [1e-4, 1e-3, 1e-2]
                    .iter()
                    .map(|s| iv.hi - s * iv.len())
                    .all(|x| config.rates.nu(i, j, x) > 0.0);
                nonneg && feeds
            });
            if !rescued {
                out.push(EscapeFailure {
                    species: j,
                    interval: iv,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::presets;
    use crate::model::potential::PotentialSet;
    use crate::model::rates::TransitionRates;
    use crate::model::{ModelConfig, Normalization};

    fn report(cfg: &ModelConfig) -> AssumptionReport {
        check_assumptions(cfg, &decompose_regions(&cfg.potentials, 1024))
    }

    #[test]
    fn constant_positive_slopes() {
        let cfg = ModelConfig::new(
            PotentialSet::from_specs([presets::linear(1.0), presets::linear(2.0)]).unwrap(),
            TransitionRates::symmetric_pair(1.0, Regime::Bounded).unwrap(),
            Normalization::UnitAtOrigin,
        )
        .unwrap();
        let r = report(&cfg);
        assert!(r.rates_bounded_below && r.potentials_regular && r.j_nonempty);
        assert!(r.max_slope_positive);
        assert!(r.applies(Theorem::MinPlus));
        assert_eq!(r.primary_theorem(), Some(Theorem::MinPlus));
    }

    #[test]
    fn cosine_pair_needs_piecewise() {
        let r = report(&presets::cosine_pair());
        assert!(!r.max_slope_positive);
        assert!(r.finite_sign_structure);
        assert!(!r.applies(Theorem::MinPlus));
        assert!(r.applies(Theorem::Piecewise));
        assert!(r.origin_starts_j);
    }

    #[test]
    fn strong_regime_three_species_rejected() {
        let cfg = ModelConfig::new(
            PotentialSet::from_specs(vec![presets::linear(1.0); 3]).unwrap(),
            TransitionRates::from_constant_matrix(
                &[
                    vec![2.0, 1.0, 1.0],
                    vec![1.0, 2.0, 1.0],
                    vec![1.0, 1.0, 2.0],
                ],
                Regime::Strong,
            )
            .unwrap(),
            Normalization::UnitAtOrigin,
        )
        .unwrap();
        assert!(!report(&cfg).applies(Theorem::StrongCoupling));
        assert!(report(&presets::demo(Regime::Strong)).applies(Theorem::StrongCoupling));
    }

    #[test]
    fn vanishing_demo_escapes() {
        let r = report(&presets::vanishing());
        assert_eq!(r.vanishing_escape, Some(true));
        assert!(r.applies(Theorem::VanishingRates));
    }

    #[test]
    fn flat_has_no_theorem() {
        let r = report(&presets::flat());
        assert!(!r.j_nonempty);
        assert!(r.primary_theorem().is_none());
    }

    #[test]
    fn demo_is_min_plus() {
        let r = report(&presets::demo(Regime::Bounded));
        assert!(r.applies(Theorem::MinPlus));
        assert!(r.min_slope_at_origin_positive && r.origin_starts_j);
    }
}
