//! Phase functions and the quantitative estimates they obey.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelConfig, PotentialSet};
use crate::numerics::trapezoid;
use crate::steady::{phase_residual_values, DensityField, PhaseField, DENSITY_FLOOR};

/// `R_i = −σ ln n_i`, `S = −σ ln Σ_i n_i`. Densities at or below `1e-300` are
/// rejected: the phase Newton path must be used there.
pub fn to_phase(density: &DensityField) -> Result<PhaseField> {
    let sigma = density.sigma;
    for (i, v) in density.values.iter().enumerate() {
        if let Some(m) = v.iter().position(|x| !(*x > DENSITY_FLOOR)) {
            return Err(Error::input(format!(
                "density of species {} at node {m} (x = {}) is {:e}, below the phase floor",
                i + 1,
                density.grid.x(m),
                v[m]
            )));
        }
    }
    let r = density
        .values
        .iter()
        .map(|v| v.iter().map(|x| -sigma * x.ln()).collect())
        .collect();
    let mut p = PhaseField::from_phases(density.grid, sigma, r, density.normalization);
    p.s_values = density.total().iter().map(|t| -sigma * t.ln()).collect();
    Ok(p)
}

/// Nodal first derivative: centered inside, second-order one-sided at the ends.
pub fn nodal_derivative(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    assert!(n >= 3, "need at least three samples");
    (0..n)
        .map(|m| {
            if m == 0 {
                (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
            } else if m == n - 1 {
                (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h)
            } else {
                (v[m + 1] - v[m - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// One interface where `DS` leaves `[min ψ′, max ψ′]` by more than the slack.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluxViolation {
    pub interface: usize,
    pub x: f64,
    pub ds: f64,
    pub lower: f64,
    pub upper: f64,
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub interfaces: usize,
    /// Allowed excess, `5h·Lip(ψ′)` plus a rounding allowance of
    /// `1e-9·(1 + max|ψ′|)`.
    pub slack: f64,
    /// Largest excess over all interfaces (negative when strictly inside).
    pub worst_excess: f64,
    pub violations: Vec<FluxViolation>,
}

impl BoundReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Compares the interface slope of `S` with `min_i ψ′_i` and `max_i ψ′_i` at
/// the interface midpoint.
pub fn check_flux_bounds(phase: &PhaseField, pot: &PotentialSet) -> BoundReport {
    let grid = phase.grid;
    let h = grid.h();
    let steepest = (0..pot.species_count())
        .map(|i| pot.max_abs_slope(i))
        .fold(0.0, f64::max);
    let slack = 5.0 * h * pot.slope_lipschitz() + 1e-9 * (1.0 + steepest);
    let s = &phase.s_values;
    let mut worst = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    for m in 0..grid.cells() {
        let x = (m as f64 + 0.5) * h;
        let ds = (s[m + 1] - s[m]) / h;
        let (lower, upper) = (pot.min_slope(x).0, pot.max_slope(x).0);
        let excess = (lower - ds).max(ds - upper);
        worst = worst.max(excess);
        if excess > slack {
            violations.push(FluxViolation {
                interface: m,
                x,
                ds,
                lower,
                upper,
                excess,
            });
        }
    }
    BoundReport {
        interfaces: grid.cells(),
        slack,
        worst_excess: worst,
        violations,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairGap {
    pub i: usize,
    pub j: usize,
    /// Trapezoidal `∫ (R_i − R_j)²`.
    pub integral: f64,
    pub max_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub sigma: f64,
    pub pairs: Vec<PairGap>,
}

impl GapReport {
    /// Largest `∫(R_i − R_j)²` over all pairs (zero for a single species).
    pub fn max_integral(&self) -> f64 {
        self.pairs.iter().map(|p| p.integral).fold(0.0, f64::max)
    }
}

pub fn pairwise_gap(phase: &PhaseField) -> GapReport {
    let ni = phase.species_count();
    let h = phase.grid.h();
    let mut pairs = Vec::new();
    for i in 0..ni {
        for j in i + 1..ni {
            let d: Vec<f64> = phase.r_values[i]
                .iter()
                .zip(&phase.r_values[j])
                .map(|(a, b)| a - b)
                .collect();
            let sq: Vec<f64> = d.iter().map(|v| v * v).collect();
            pairs.push(PairGap {
                i,
                j,
                integral: trapezoid(&sq, h),
                max_abs: d.iter().fold(0.0, |m: f64, v| m.max(v.abs())),
            });
        }
    }
    GapReport {
        sigma: phase.sigma,
        pairs,
    }
}

/// Discrete phase-system residual at every node, `[i][m]`.
pub fn phase_residual(phase: &PhaseField, config: &ModelConfig) -> Result<Vec<Vec<f64>>> {
    if phase.species_count() != config.species_count() {
        return Err(Error::input(
            "phase and configuration disagree on the species count",
        ));
    }
    phase_residual_values(config, phase)
}

pub fn max_abs_residual(residual: &[Vec<f64>]) -> f64 {
    residual
        .iter()
        .flatten()
        .fold(0.0, |m: f64, v| m.max(v.abs()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientBound {
    pub species: usize,
    pub max_slope: f64,
    /// `max|ψ′_i| + √(σ·max|ν_ii − ψ″_i|)`, rates scaled as in the regime.
    pub bound: f64,
    pub holds: bool,
}

/// Checks `max|DR_i| ≤ 1.1·(max|ψ′_i| + √(σ·max|ν_ii − ψ″_i|)) + Lip(ψ′)·h`.
pub fn gradient_bounds(phase: &PhaseField, config: &ModelConfig) -> Vec<GradientBound> {
    let grid = phase.grid;
    let h = grid.h();
    let scale = config.rates.coupling_scale(phase.sigma);
    let lip = config.potentials.slope_lipschitz();
    let nodes = grid.nodes();
    (0..phase.species_count())
        .map(|i| {
            let pot = config.potentials.get(i);
            let dr = phase.r_values[i]
                .windows(2)
                .map(|w| ((w[1] - w[0]) / h).abs())
                .fold(0.0, f64::max);
            let c = nodes
                .iter()
                .map(|&x| (scale * config.rates.nu(i, i, x) - pot.curvature(x)).abs())
                .fold(0.0, f64::max);
            let bound = config.potentials.max_abs_slope(i) + (phase.sigma * c).sqrt();
            GradientBound {
                species: i,
                max_slope: dr,
                bound,
                holds: dr <= 1.1 * bound + lip * h,
            }
        })
        .collect()
}

/// Largest violation of `S ≤ min_i R_i ≤ S + σ ln I` (zero when it holds).
pub fn sandwich_violation(phase: &PhaseField) -> f64 {
    let width = phase.sigma * (phase.species_count() as f64).ln();
    phase
        .min_phase()
        .iter()
        .zip(&phase.s_values)
        .map(|(r, s)| {
            let scale = 1e-14 * (1.0 + r.abs());
            ((s - r) - scale).max(r - s - width - scale).max(0.0)
        })
        .fold(0.0, f64::max)
}
