//! Transition rates `ν_ij(x)` between conformations.
//!
//! `ν_ij` is the rate at which mass of species `j` turns into species `i`;
//! the diagonal carries the total outflow, `ν_ii = Σ_{j≠i} ν_ji`.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the rates scale with the diffusion `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Rates independent of `σ`, bounded below by `k > 0`.
    Bounded,
    /// Rates multiplied by `1/σ`; two species only.
    Strong,
    /// `σ`-independent rates that may vanish on subsets of `[0, 1]`.
    Vanishing,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Bounded => "bounded",
            Regime::Strong => "strong",
            Regime::Vanishing => "vanishing",
        })
    }
}

/// A nonnegative rate profile on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateFunction {
    Constant {
        value: f64,
    },
    /// `height·sin²(π(x − lo)/(hi − lo))` on `[lo, hi]`, zero elsewhere.
    Bump {
        lo: f64,
        hi: f64,
        height: f64,
    },
    Sum {
        terms: Vec<RateFunction>,
    },
}

impl RateFunction {
    pub const ZERO: RateFunction = RateFunction::Constant { value: 0.0 };

    pub fn constant(value: f64) -> Self {
        RateFunction::Constant { value }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            RateFunction::Constant { value } => *value,
            RateFunction::Bump { lo, hi, height } => {
                if x <= *lo || x >= *hi {
                    0.0
                } else {
                    let s = (PI * (x - lo) / (hi - lo)).sin();
                    height * s * s
                }
            }
            RateFunction::Sum { terms } => terms.iter().map(|t| t.eval(x)).sum(),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            RateFunction::Constant { .. } => true,
            RateFunction::Bump { .. } => false,
            RateFunction::Sum { terms } => terms.iter().all(RateFunction::is_constant),
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            RateFunction::Constant { value } => {
                if !(value.is_finite() && *value >= 0.0) {
                    return Err(Error::input(format!(
                        "rate {value} must be finite and nonnegative"
                    )));
                }
            }
            RateFunction::Bump { lo, hi, height } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::input("rate bump needs finite lo < hi"));
                }
                if !(height.is_finite() && *height >= 0.0) {
                    return Err(Error::input(
                        "rate bump height must be finite and nonnegative",
                    ));
                }
            }
            RateFunction::Sum { terms } => {
                for t in terms {
                    t.check()?;
                }
            }
        }
        Ok(())
    }
}

/// The full `I×I` rate matrix with its regime tag.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionRates {
    species_count: usize,
    /// Row-major, `entries[i·I + j] = ν_ij`.
    entries: Vec<RateFunction>,
    regime: Regime,
    lower_bound_k: f64,
}

/// Sample count used when rates depend on `x`.
const RATE_SAMPLES: usize = 512;

impl TransitionRates {
    /// Builds rates from an explicit matrix of profiles, diagonal included.
    /// Entries must be finite and nonnegative; consistency of the diagonal is
    /// left to [`validate_rates`].
    pub fn new(species_count: usize, entries: Vec<RateFunction>, regime: Regime) -> Result<Self> {
        if species_count == 0 {
            return Err(Error::input("at least one species is required"));
        }
        if entries.len() != species_count * species_count {
            return Err(Error::input(format!(
                "rate matrix has {} entries, expected {}",
                entries.len(),
                species_count * species_count
            )));
        }
        for e in &entries {
            e.check()?;
        }
        let mut rates = Self {
            species_count,
            entries,
            regime,
            lower_bound_k: 0.0,
        };
        rates.lower_bound_k = rates.sampled_off_diagonal_min();
        Ok(rates)
    }

    /// Constant rates from a square matrix given row by row.
    pub fn from_constant_matrix(matrix: &[Vec<f64>], regime: Regime) -> Result<Self> {
        let n = matrix.len();
        if matrix.iter().any(|row| row.len() != n) {
            return Err(Error::input("rate matrix must be square"));
        }
        let entries = matrix
            .iter()
            .flatten()
            .map(|&v| RateFunction::constant(v))
            .collect();
        Self::new(n, entries, regime)
    }

    /// Off-diagonal profiles `((i, j), ν_ij)`; unspecified pairs are zero and
    /// each diagonal is derived as the column outflow `Σ_{j≠i} ν_ji`.
    pub fn from_off_diagonal(
        species_count: usize,
        off_diagonal: Vec<((usize, usize), RateFunction)>,
        regime: Regime,
    ) -> Result<Self> {
        let n = species_count;
        let mut entries = vec![RateFunction::ZERO; n * n];
        for ((i, j), f) in off_diagonal {
            if i >= n || j >= n || i == j {
                return Err(Error::input(format!(
                    "off-diagonal rate index ({i}, {j}) invalid for {n} species"
                )));
            }
            entries[i * n + j] = f;
        }
        for i in 0..n {
            let terms = (0..n)
                .filter(|&j| j != i)
                .map(|j| entries[j * n + i].clone())
                .collect();
            entries[i * n + i] = RateFunction::Sum { terms };
        }
        Self::new(n, entries, regime)
    }

    /// Symmetric constant two-species rates `ν_12 = ν_21 = nu`.
    pub fn symmetric_pair(nu: f64, regime: Regime) -> Result<Self> {
        Self::from_constant_matrix(&[vec![nu, nu], vec![nu, nu]], regime)
    }

    /// A single species has no transitions.
    pub fn single() -> Self {
        Self::from_constant_matrix(&[vec![0.0]], Regime::Bounded).expect("valid")
    }

    pub fn species_count(&self) -> usize {
        self.species_count
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// Same rates with another regime tag.
    pub fn with_regime(&self, regime: Regime) -> Self {
        Self {
            regime,
            ..self.clone()
        }
    }

    /// Sampled `min_{i≠j, x} ν_ij(x)` (zero for a single species).
    pub fn lower_bound_k(&self) -> f64 {
        self.lower_bound_k
    }

    pub fn entry(&self, i: usize, j: usize) -> &RateFunction {
        &self.entries[i * self.species_count + j]
    }

    pub fn nu(&self, i: usize, j: usize, x: f64) -> f64 {
        self.entry(i, j).eval(x)
    }

    pub fn is_constant(&self) -> bool {
        self.entries.iter().all(RateFunction::is_constant)
    }

    /// Factor multiplying the coupling terms: `1/σ` in the strong regime.
    pub fn coupling_scale(&self, sigma: f64) -> f64 {
        match self.regime {
            Regime::Strong => 1.0 / sigma,
            _ => 1.0,
        }
    }

    /// Points at which x-dependent properties are checked.
    pub fn sample_points(&self) -> Vec<f64> {
        if self.is_constant() {
            vec![0.0]
        } else {
            (0..=RATE_SAMPLES)
                .map(|k| k as f64 / RATE_SAMPLES as f64)
                .collect()
        }
    }

    fn sampled_off_diagonal_min(&self) -> f64 {
        let n = self.species_count;
        if n < 2 {
            return 0.0;
        }
        let mut k = f64::INFINITY;
        for x in self.sample_points() {
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        k = k.min(self.nu(i, j, x));
                    }
                }
            }
        }
        k
    }
}

/// A single failed rate condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "condition", rename_all = "snake_case")]
pub enum RateViolation {
    /// `ν_ii(x) ≠ Σ_{j≠i} ν_ji(x)`; `column` is zero-based.
    DiagonalMismatch {
        column: usize,
        x: f64,
        diagonal: f64,
        off_diagonal_sum: f64,
    },
    /// An off-diagonal rate is not bounded away from zero in a regime that needs it.
    NotBoundedBelow {
        row: usize,
        column: usize,
        x: f64,
        value: f64,
    },
    /// The strong regime is defined for two species only.
    StrongNeedsTwoSpecies { species_count: usize },
}

impl fmt::Display for RateViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateViolation::DiagonalMismatch {
                column,
                x,
                diagonal,
                off_diagonal_sum,
            } => write!(
                f,
                "column {}: diagonal {diagonal} != off-diagonal sum {off_diagonal_sum} at x = {x}",
                column + 1
            ),
            RateViolation::NotBoundedBelow {
                row,
                column,
                x,
                value,
            } => write!(
                f,
                "rate ({}, {}) = {value} at x = {x} is not positive",
                row + 1,
                column + 1
            ),
            RateViolation::StrongNeedsTwoSpecies { species_count } => {
                write!(f, "strong regime requires 2 species, got {species_count}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<RateViolation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks mass conservation of the rate matrix and the regime's positivity
/// requirement. Never fails; every violation is reported.
pub fn validate_rates(rates: &TransitionRates) -> ValidationReport {
    let n = rates.species_count();
    let mut violations = Vec::new();
    let xs = rates.sample_points();
    for i in 0..n {
        for &x in &xs {
            let diagonal = rates.nu(i, i, x);
            let sum: f64 = (0..n).filter(|&j| j != i).map(|j| rates.nu(j, i, x)).sum();
            if (diagonal - sum).abs() > 1e-12 * diagonal.abs().max(sum.abs()).max(1.0) {
                violations.push(RateViolation::DiagonalMismatch {
                    column: i,
                    x,
                    diagonal,
                    off_diagonal_sum: sum,
                });
                break;
            }
        }
    }
    if matches!(rates.regime(), Regime::Bounded | Regime::Strong) {
        'pairs: for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                for &x in &xs {
                    let value = rates.nu(i, j, x);
                    if !(value > 0.0) {
                        violations.push(RateViolation::NotBoundedBelow {
                            row: i,
                            column: j,
                            x,
                            value,
                        });
                        continue 'pairs;
                    }
                }
            }
        }
    }
    if rates.regime() == Regime::Strong && n != 2 {
        violations.push(RateViolation::StrongNeedsTwoSpecies { species_count: n });
    }
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(m: &[Vec<f64>]) -> TransitionRates {
        TransitionRates::from_constant_matrix(m, Regime::Bounded).unwrap()
    }

    #[test]
    fn consistent_pair_is_valid() {
        let r = constant(&[vec![2.0, 3.0], vec![2.0, 3.0]]);
        assert!(validate_rates(&r).is_valid());
        assert_eq!(r.lower_bound_k(), 2.0);
    }

    #[test]
    fn inconsistent_column_reported() {
        let r = constant(&[vec![1.0, 2.0], vec![2.0, 2.0]]);
        let rep = validate_rates(&r);
        assert_eq!(rep.violations.len(), 1);
        match &rep.violations[0] {
            RateViolation::DiagonalMismatch {
                column,
                diagonal,
                off_diagonal_sum,
                ..
            } => {
                assert_eq!(*column, 0);
                assert_eq!((*diagonal, *off_diagonal_sum), (1.0, 2.0));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(rep.violations[0].to_string().starts_with("column 1"));
    }

    #[test]
    fn three_species_uniform() {
        let m: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..3).map(|j| if i == j { 2.0 } else { 1.0 }).collect())
            .collect();
        assert!(validate_rates(&constant(&m)).is_valid());
    }

    #[test]
    fn derived_diagonal_is_consistent() {
        let r = TransitionRates::from_off_diagonal(
            2,
            vec![(
                (0, 1),
                RateFunction::Bump {
                    lo: 0.6,
                    hi: 0.8,
                    height: 3.0,
                },
            )],
            Regime::Vanishing,
        )
        .unwrap();
        assert!(validate_rates(&r).is_valid());
        assert_eq!(r.nu(1, 1, 0.7), 3.0);
        assert_eq!(r.nu(0, 0, 0.7), 0.0);
        // the same rates are not bounded below
        let bounded = r.with_regime(Regime::Bounded);
        assert!(!validate_rates(&bounded).is_valid());
    }

    #[test]
    fn strong_needs_two_species() {
        let m: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..3).map(|j| if i == j { 2.0 } else { 1.0 }).collect())
            .collect();
        let r = TransitionRates::from_constant_matrix(&m, Regime::Strong).unwrap();
        assert!(validate_rates(&r)
            .violations
            .contains(&RateViolation::StrongNeedsTwoSpecies { species_count: 3 }));
    }

    #[test]
    fn negative_entry_rejected() {
        assert!(TransitionRates::from_constant_matrix(
            &[vec![1.0, -1.0], vec![1.0, 1.0]],
            Regime::Bounded
        )
        .is_err());
    }
}
