use serde::{Deserialize, Serialize};

use super::potential::{PotentialSet, PotentialSpec};
use super::rates::{RateFunction, Regime, TransitionRates};
use crate::error::{Error, Result};

/// How a steady state is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `∫ Σ_i n_i = 1`.
    UnitMass,
    /// `Σ_i n_i(0) = 1`.
    UnitAtOrigin,
}

/// Potentials, rates and normalization of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub potentials: PotentialSet,
    pub rates: TransitionRates,
    pub normalization: Normalization,
}

impl ModelConfig {
    pub fn new(
        potentials: PotentialSet,
        rates: TransitionRates,
        normalization: Normalization,
    ) -> Result<Self> {
        if potentials.species_count() != rates.species_count() {
            return Err(Error::input(format!(
                "{} potentials but {} species in the rate matrix",
                potentials.species_count(),
                rates.species_count()
            )));
        }
        Ok(Self {
            potentials,
            rates,
            normalization,
        })
    }

    pub fn species_count(&self) -> usize {
        self.potentials.species_count()
    }

    pub fn regime(&self) -> Regime {
        self.rates.regime()
    }

    pub fn with_normalization(&self, normalization: Normalization) -> Self {
        Self {
            normalization,
            ..self.clone()
        }
    }

    pub fn with_regime(&self, regime: Regime) -> Self {
        Self {
            rates: self.rates.with_regime(regime),
            ..self.clone()
        }
    }
}

/// Ready-made configurations used by the tests, the CLI and the docs.
pub mod presets {
    use super::*;

    /// Sawtooth tooth height of the two-species demo.
    pub const DEMO_AMPLITUDE: f64 = 1.0;
    /// Teeth per unit length of the demo.
    pub const DEMO_TEETH: usize = 3;

    pub fn linear(slope: f64) -> PotentialSpec {
        PotentialSpec::Linear { slope, offset: 0.0 }
    }

    pub fn cosine(amplitude: f64) -> PotentialSpec {
        PotentialSpec::Cosine {
            amplitude,
            frequency: 1.0,
            phase: 0.0,
        }
    }

    /// Asymmetric sawtooth (rise:fall = 4:1) and its half-period shift.
    pub fn demo_potentials() -> (PotentialSpec, PotentialSpec) {
        let period = 1.0 / DEMO_TEETH as f64;
        let base = PotentialSpec::Sawtooth {
            period,
            amplitude: DEMO_AMPLITUDE,
            rise_fraction: 0.8,
            phase: 0.05,
            smoothing: 0.06,
        };
        let shifted = PotentialSpec::Shifted {
            base: Box::new(base.clone()),
            shift: 0.5 * period,
        };
        (base, shifted)
    }

    fn build(
        specs: Vec<PotentialSpec>,
        rates: TransitionRates,
        normalization: Normalization,
    ) -> ModelConfig {
        ModelConfig::new(
            PotentialSet::from_specs(specs).expect("preset potentials are valid"),
            rates,
            normalization,
        )
        .expect("preset species counts agree")
    }

    /// Two sawtooth species with unit symmetric rates.
    pub fn demo(regime: Regime) -> ModelConfig {
        let (a, b) = demo_potentials();
        build(
            vec![a, b],
            TransitionRates::symmetric_pair(1.0, regime).expect("valid"),
            Normalization::UnitAtOrigin,
        )
    }

    /// One species in `ψ(x) = slope·x`.
    pub fn single_linear(slope: f64) -> ModelConfig {
        build(
            vec![linear(slope)],
            TransitionRates::single(),
            Normalization::UnitAtOrigin,
        )
    }

    /// Two species sharing one potential, with `ν_12 = ν_21 = nu`.
    pub fn symmetric(spec: PotentialSpec, nu: f64) -> ModelConfig {
        build(
            vec![spec.clone(), spec],
            TransitionRates::symmetric_pair(nu, Regime::Bounded).expect("valid"),
            Normalization::UnitAtOrigin,
        )
    }

    /// `ψ′_1 = ψ′_2 = cos(2πx)`.
    pub fn cosine_pair() -> ModelConfig {
        symmetric(cosine(1.0), 1.0)
    }

    /// `ψ′_1 = 1`, `ψ′_2 = cos(2πx)`.
    pub fn unit_and_cosine() -> ModelConfig {
        build(
            vec![linear(1.0), cosine(1.0)],
            TransitionRates::symmetric_pair(1.0, Regime::Bounded).expect("valid"),
            Normalization::UnitAtOrigin,
        )
    }

    /// Flat potentials: no drift, no motor effect.
    pub fn flat() -> ModelConfig {
        symmetric(linear(0.0), 1.0)
    }

    /// `ψ′_1 = 1`, `ψ′_2 = cos(2πx)` with transitions only inside a bump on
    /// `[0.65, 0.8]`, which straddles the right end of species 2's descent.
    pub fn vanishing() -> ModelConfig {
        let bump = RateFunction::Bump {
            lo: 0.65,
            hi: 0.8,
            height: 1.0,
        };
        let rates = TransitionRates::from_off_diagonal(
            2,
            vec![((0, 1), bump.clone()), ((1, 0), bump)],
            Regime::Vanishing,
        )
        .expect("valid");
        build(
            vec![linear(1.0), cosine(1.0)],
            rates,
            Normalization::UnitAtOrigin,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::rates::validate_rates;

    #[test]
    fn species_mismatch_rejected() {
        let pot = PotentialSet::from_specs([presets::linear(1.0)]).unwrap();
        let rates = TransitionRates::symmetric_pair(1.0, Regime::Bounded).unwrap();
        assert!(ModelConfig::new(pot, rates, Normalization::UnitMass).is_err());
    }

    #[test]
    fn presets_have_valid_rates() {
        for cfg in [
            presets::demo(Regime::Bounded),
            presets::demo(Regime::Strong),
            presets::single_linear(1.0),
            presets::cosine_pair(),
            presets::unit_and_cosine(),
            presets::flat(),
            presets::vanishing(),
        ] {
            assert!(validate_rates(&cfg.rates).is_valid(), "{cfg:?}");
        }
    }
}
