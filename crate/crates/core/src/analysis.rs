//! Sweeps against the limit profiles, concentration near the origin, and the
//! sufficient conditions for a motor effect.

use serde::Serialize;

use crate::discretize::Grid;
use crate::error::{Error, Result};
use crate::hj_limit::{applicable_limit, LimitOutcome, LimitProfile};
use crate::model::{
    check_assumptions, decompose_regions, AssumptionReport, Interval, ModelConfig, Normalization,
    PotentialSet, RegionDecomposition, Theorem, TransitionRates,
};
use crate::numerics::{integrate, trapezoid};
use crate::phase::{check_flux_bounds, pairwise_gap, BoundReport, GapReport};
use crate::steady::{
    continuation_sweep, sigma_ladder, DensityField, PhaseField, SolvePath, SweepEntry,
};

/// Default cutoff for concentration masses.
pub const DEFAULT_EPSILON: f64 = 0.05;
/// Far mass at or below which a motor effect is reported.
pub const MOTOR_THRESHOLD: f64 = 0.01;

/// Sample count for region decomposition in reports.
pub const REGION_SAMPLES: usize = 4096;
const CONDITION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub epsilon: f64,
    /// `∫₀^ε n_i` under unit total mass.
    pub masses_near_zero: Vec<f64>,
    /// Estimates of the weights `ρ_i` of `n_i → ρ_i δ₀`.
    pub rho_estimates: Vec<f64>,
    /// `∫_ε^1 Σ_i n_i`.
    pub total_far_mass: f64,
    pub motor_effect: bool,
}

/// Splits the trapezoid mass of cell `[a, b]` at `x`, using the exponential
/// interpolant between the end values to place the split.
fn split_fraction(va: f64, vb: f64, t: f64) -> f64 {
    if va <= 0.0 || vb <= 0.0 {
        return t;
    }
    let k = (vb / va).ln();
    if k.abs() < 1e-12 {
        t
    } else {
        (k * t).exp_m1() / k.exp_m1()
    }
}

/// Trapezoidal masses on `[0, ε]` and `[ε, 1]` after renormalizing to unit
/// mass. The cell containing `ε` is split geometrically, so near and far
/// masses still add up to the trapezoid total.
pub fn concentration_masses(density: &DensityField, epsilon: f64) -> Result<ConcentrationReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::input(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    let d = density.normalized(Normalization::UnitMass)?;
    let grid = d.grid;
    let h = grid.h();
    let t = epsilon / h;
    let m = (t.floor() as usize).min(grid.cells() - 1);
    let frac = t - m as f64;
    let masses_near_zero: Vec<f64> = d
        .values
        .iter()
        .map(|v| {
            let whole = trapezoid(&v[..=m], h);
            let cell = 0.5 * h * (v[m] + v[m + 1]);
            whole + cell * split_fraction(v[m], v[m + 1], frac)
        })
        .collect();
    let total_near: f64 = masses_near_zero.iter().sum();
    let total = d.mass();
    let total_far_mass = (total - total_near).max(0.0);
    Ok(ConcentrationReport {
        epsilon,
        rho_estimates: masses_near_zero.clone(),
        masses_near_zero,
        total_far_mass,
        motor_effect: total_far_mass <= MOTOR_THRESHOLD,
    })
}

/// Concentration of a phase field, via its unit-mass density.
pub fn phase_concentration(phase: &PhaseField, epsilon: f64) -> Result<ConcentrationReport> {
    concentration_masses(
        &phase.normalized(Normalization::UnitMass).to_density(),
        epsilon,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub sigma: f64,
    pub path: SolvePath,
    /// `‖(R_i^σ − R_i^σ(0)) − R‖_∞` per species.
    pub errors: Vec<f64>,
    pub max_error: f64,
    /// Largest `∫(R_i − R_j)²` over pairs.
    pub gap_integral: f64,
    pub far_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub theorem: Theorem,
    pub cells: usize,
    pub epsilon: f64,
    /// Descending `σ`.
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `ln(max error)` against `ln σ`.
    pub rate: Option<f64>,
    /// Why `rate` is absent, if it is.
    pub rate_note: Option<String>,
    /// `σ` and message of the solve that truncated the table.
    pub failure: Option<(f64, String)>,
}

/// Errors below this are rounding, not convergence, and are left out of the fit.
const FIT_FLOOR: f64 = 1e-8;

fn fit_rate(rows: &[ConvergenceRow]) -> (Option<f64>, Option<String>) {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.max_error > FIT_FLOOR)
        .map(|r| (r.sigma.ln(), r.max_error.ln()))
        .collect();
    if pts.len() < 2 {
        return (
            None,
            Some(format!(
                "fewer than two errors above {FIT_FLOOR:e}; the scheme is exact at this resolution"
            )),
        );
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (Some(sxy / sxx), None)
}

impl ConvergenceTable {
    pub fn max_errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.max_error).collect()
    }

    /// Errors strictly decrease except for at most one increase of relative
    /// size at most `slack`.
    pub fn errors_decrease(&self, slack: f64) -> bool {
        let e = self.max_errors();
        let mut bumps = 0;
        for w in e.windows(2) {
            if w[1] >= w[0] {
                bumps += 1;
                if w[1] > w[0] * (1.0 + slack) {
                    return false;
                }
            }
        }
        bumps <= 1
    }
}

/// Solves along `sigmas` and measures each phase against `limit`.
pub fn convergence_study(
    config: &ModelConfig,
    grid: Grid,
    sigmas: &[f64],
    limit: &LimitProfile,
) -> Result<ConvergenceTable> {
    if sigmas.is_empty() {
        return Err(Error::input("sigma list is empty"));
    }
    if limit.grid != grid {
        return Err(Error::input("limit profile and sweep use different grids"));
    }
    let outcome = continuation_sweep(config, grid, sigmas)?;
    let mut rows = Vec::with_capacity(outcome.entries.len());
    for e in &outcome.entries {
        let errors: Vec<f64> = e
            .phase
            .r_values
            .iter()
            .map(|r| {
                r.iter()
                    .zip(&limit.r_values)
                    .map(|(v, l)| (v - r[0] - l).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        let far = match &e.density {
            Some(d) => concentration_masses(d, DEFAULT_EPSILON)?,
            None => phase_concentration(&e.phase, DEFAULT_EPSILON)?,
        };
        rows.push(ConvergenceRow {
            sigma: e.sigma,
            path: e.path,
            max_error: errors.iter().copied().fold(0.0, f64::max),
            errors,
            gap_integral: pairwise_gap(&e.phase).max_integral(),
            far_mass: far.total_far_mass,
        });
    }
    let (rate, rate_note) = fit_rate(&rows);
    Ok(ConvergenceTable {
        theorem: limit.theorem,
        cells: grid.cells(),
        epsilon: DEFAULT_EPSILON,
        rows,
        rate,
        rate_note,
        failure: outcome.failure.map(|(s, e)| (s, e.to_string())),
    })
}

/// One `K` interval against the `J` interval just before it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LobeBalance {
    pub k_interval: Interval,
    pub j_interval: Option<Interval>,
    /// `∫_K max_i ψ′_i` (negative).
    pub k_integral: f64,
    /// `∫_J min_i ψ′_i`.
    pub j_integral: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    /// `|∫_{K_l} max ψ′| < ∫_{J_l} min ψ′` for every descent interval.
    pub lobe_balance: Vec<LobeBalance>,
    pub lobe_balance_holds: bool,
    /// The numbers of `J` and `K` intervals agree.
    pub interval_counts_match: bool,
    /// `√k·|(∪J)^c|` for two strongly coupled species.
    pub strong_deficit: f64,
    /// `∫_{∪J} min ψ′`.
    pub strong_gain: f64,
    pub strong_budget_holds: bool,
    pub origin_starts_j: bool,
    pub min_slope_at_origin_positive: bool,
}

/// Evaluates the integral conditions that guarantee concentration at `0`
/// with every species keeping positive weight.
pub fn check_corollary_conditions(
    pot: &PotentialSet,
    regions: &RegionDecomposition,
    rates: &TransitionRates,
) -> ConditionReport {
    let min_slope = |x: f64| pot.min_slope(x).0;
    let max_slope = |x: f64| pot.max_slope(x).0;
    let j_int = |iv: &Interval| integrate(min_slope, iv.lo, iv.hi, CONDITION_TOL);
    let lobe_balance: Vec<LobeBalance> = regions
        .k_intervals
        .iter()
        .filter(|iv| !iv.is_point())
        .map(|k| {
            let j = regions
                .j_intervals
                .iter()
                .filter(|j| j.hi <= k.lo)
                .max_by(|a, b| a.hi.total_cmp(&b.hi))
                .copied();
            let k_integral = integrate(max_slope, k.lo, k.hi, CONDITION_TOL);
            let j_integral = j.as_ref().map_or(0.0, j_int);
            LobeBalance {
                k_interval: *k,
                j_interval: j,
                k_integral,
                j_integral,
                holds: k_integral.abs() < j_integral,
            }
        })
        .collect();
    let strong_gain: f64 = regions.j_intervals.iter().map(j_int).sum();
    let strong_deficit = rates.lower_bound_k().sqrt() * (1.0 - regions.j_measure());
    let tol = regions.detection_tolerance;
    ConditionReport {
        lobe_balance_holds: lobe_balance.iter().all(|l| l.holds),
        lobe_balance,
        interval_counts_match: regions.j_intervals.len() == regions.k_intervals.len(),
        strong_deficit,
        strong_gain,
        strong_budget_holds: strong_deficit < strong_gain,
        origin_starts_j: regions.j_intervals.first().is_some_and(|iv| iv.lo == 0.0),
        min_slope_at_origin_positive: pot.min_slope(0.0).0 > tol,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitComparison {
    pub theorem: Theorem,
    /// `max_i ‖(R_i^σ − R_i^σ(0)) − R‖_∞`.
    pub max_error: f64,
}

/// Everything known about one configuration at one `σ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MotorEffectReport {
    pub sigma: f64,
    pub cells: usize,
    pub regime: crate::model::Regime,
    pub path: SolvePath,
    pub concentration: ConcentrationReport,
    pub motor_effect: bool,
    pub flux_bounds: BoundReport,
    pub phase_gap: GapReport,
    pub assumptions: AssumptionReport,
    pub conditions: ConditionReport,
    pub limit: Option<LimitComparison>,
    /// Why no limit comparison was made.
    pub limit_note: Option<String>,
}

impl MotorEffectReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Solves at `sigma_final` (by continuation from `σ = 0.05` when smaller)
/// and assembles concentration, flux-bound, gap, assumption and limit data.
pub fn motor_effect_report(
    config: &ModelConfig,
    grid: Grid,
    sigma_final: f64,
    epsilon: f64,
) -> Result<MotorEffectReport> {
    if !(sigma_final > 0.0 && sigma_final.is_finite()) {
        return Err(Error::input(format!(
            "sigma must be positive, got {sigma_final}"
        )));
    }
    let ladder = if sigma_final < 0.05 {
        sigma_ladder(0.05, sigma_final)
    } else {
        vec![sigma_final]
    };
    let entry = continuation_sweep(config, grid, &ladder)?
        .into_result()?
        .pop()
        .expect("nonempty ladder");
    Ok(motor_effect_report_for(config, &entry, epsilon)?.0)
}

/// Report for an already solved entry, with the limit profile it was
/// compared against (if any).
pub fn motor_effect_report_for(
    config: &ModelConfig,
    entry: &SweepEntry,
    epsilon: f64,
) -> Result<(MotorEffectReport, Option<LimitProfile>)> {
    let grid = entry.phase.grid;
    let concentration = match &entry.density {
        Some(d) => concentration_masses(d, epsilon)?,
        None => phase_concentration(&entry.phase, epsilon)?,
    };
    let regions = decompose_regions(&config.potentials, REGION_SAMPLES);
    let assumptions = check_assumptions(config, &regions);
    let conditions = check_corollary_conditions(&config.potentials, &regions, &config.rates);
    let (limit, limit_note, profile) = match applicable_limit(config, &regions, grid, &assumptions)
    {
        Ok(LimitOutcome::Vanishing(_)) => (
            None,
            Some("vanishing rates give sign constraints, not a profile".to_string()),
            None,
        ),
        Ok(out) => {
            let profile = out.profile().expect("profile outcome").clone();
            let max_error = entry
                .phase
                .r_values
                .iter()
                .flat_map(|r| {
                    r.iter()
                        .zip(&profile.r_values)
                        .map(move |(v, l)| (v - r[0] - l).abs())
                })
                .fold(0.0, f64::max);
            let comparison = LimitComparison {
                theorem: profile.theorem,
                max_error,
            };
            (Some(comparison), None, Some(profile))
        }
        Err(e) => (None, Some(e.to_string()), None),
    };
    let report = MotorEffectReport {
        sigma: entry.sigma,
        cells: grid.cells(),
        regime: config.regime(),
        path: entry.path,
        motor_effect: concentration.motor_effect,
        concentration,
        flux_bounds: check_flux_bounds(&entry.phase, &config.potentials),
        phase_gap: pairwise_gap(&entry.phase),
        assumptions,
        conditions,
        limit,
        limit_note,
    };
    Ok((report, profile))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::build_grid;
    use crate::model::{presets, PotentialSpec, Regime};
    use crate::steady::solve_density;
    use std::f64::consts::PI;

    #[test]
    fn exponential_far_mass() {
        let cfg = presets::single_linear(1.0);
        let (d, _) = solve_density(&cfg, build_grid(4096).unwrap(), 0.01).unwrap();
        let r = concentration_masses(&d, 0.1).unwrap();
        let exact = (-10f64).exp() / (1.0 - (-100f64).exp()) * (1.0 - (-90f64).exp());
        assert!(
            ((r.total_far_mass - exact) / exact).abs() < 1e-3,
            "{}",
            r.total_far_mass
        );
        assert!(r.motor_effect);
        assert!((r.rho_estimates[0] + r.total_far_mass - 1.0).abs() < 1e-10);
    }

    #[test]
    fn flat_density_has_no_motor_effect() {
        let cfg = presets::single_linear(0.0);
        let (d, _) = solve_density(&cfg, build_grid(100).unwrap(), 0.05).unwrap();
        let r = concentration_masses(&d, 0.1).unwrap();
        assert!((r.rho_estimates[0] - 0.1).abs() < 1e-12);
        assert!(!r.motor_effect);
    }

    #[test]
    fn off_node_epsilon_keeps_unit_mass() {
        let cfg = presets::demo(Regime::Bounded);
        let (d, _) = solve_density(&cfg, build_grid(256).unwrap(), 0.02).unwrap();
        for eps in [0.0123, 0.05, 0.31] {
            let r = concentration_masses(&d, eps).unwrap();
            let sum: f64 = r.rho_estimates.iter().sum::<f64>() + r.total_far_mass;
            assert!((sum - 1.0).abs() < 1e-10);
        }
        assert!(concentration_masses(&d, 1.0).is_err());
    }

    #[test]
    fn geometric_split_is_exact_for_exponentials() {
        let (va, vb) = (1.0, (-0.5f64).exp());
        let f = split_fraction(va, vb, 0.3);
        let exact = (1.0 - (-0.15f64).exp()) / (1.0 - (-0.5f64).exp());
        assert!((f - exact).abs() < 1e-14);
        assert_eq!(split_fraction(2.0, 2.0, 0.3), 0.3);
    }

    #[test]
    fn symmetric_linear_pair_splits_evenly() {
        let cfg = presets::symmetric(presets::linear(1.0), 1.0);
        let (d, _) = solve_density(&cfg, build_grid(2048).unwrap(), 0.003).unwrap();
        let r = concentration_masses(&d, DEFAULT_EPSILON).unwrap();
        assert!((r.rho_estimates[0] - 0.5).abs() < 1e-6);
        assert!((r.rho_estimates[1] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn scalar_study_is_exact() {
        let cfg = presets::single_linear(1.0);
        let g = build_grid(512).unwrap();
        let regions = decompose_regions(&cfg.potentials, 1024);
        let rep = check_assumptions(&cfg, &regions);
        let lim = crate::hj_limit::limit_bounded(&cfg.potentials, g, &rep).unwrap();
        let t = convergence_study(&cfg, g, &[0.1, 0.05, 0.02], &lim).unwrap();
        assert!(t.rows.iter().all(|r| r.max_error <= 1e-9));
        assert!(t.rate.is_none() && t.rate_note.is_some());
        assert!(convergence_study(&cfg, g, &[], &lim).is_err());
    }

    #[test]
    fn cosine_pair_is_already_at_its_limit() {
        // Equal potentials with symmetric rates: n_i ∝ e^{−ψ/σ} solves the
        // scheme exactly, so R^σ − R^σ(0) = ψ − ψ(0) at every σ.
        let cfg = presets::cosine_pair();
        let g = build_grid(1024).unwrap();
        let regions = decompose_regions(&cfg.potentials, 4096);
        let rep = check_assumptions(&cfg, &regions);
        let lim = crate::hj_limit::limit_piecewise(&cfg.potentials, &regions, g, &rep).unwrap();
        let t = convergence_study(&cfg, g, &[0.05, 0.02, 0.01, 0.005], &lim).unwrap();
        assert!(
            t.max_errors().iter().all(|e| *e < 1e-12),
            "{:?}",
            t.max_errors()
        );
        assert!(t.rate.is_none());
    }

    #[test]
    fn cosine_conditions_fail_and_small_lobe_holds() {
        let cfg = presets::cosine_pair();
        let regions = decompose_regions(&cfg.potentials, 4096);
        let c = check_corollary_conditions(&cfg.potentials, &regions, &cfg.rates);
        assert_eq!(c.lobe_balance.len(), 1);
        let l = &c.lobe_balance[0];
        assert!((l.k_integral + 1.0 / PI).abs() < 1e-9);
        assert!((l.j_integral - 0.5 / PI).abs() < 1e-9);
        assert!(!c.lobe_balance_holds);

        let lobed = presets::symmetric(
            PotentialSpec::LobedCosine {
                positive_scale: 1.0,
                negative_scale: 0.25,
                frequency: 1.0,
            },
            1.0,
        );
        let regions = decompose_regions(&lobed.potentials, 4096);
        let c = check_corollary_conditions(&lobed.potentials, &regions, &lobed.rates);
        assert!((c.lobe_balance[0].k_integral + 0.25 / PI).abs() < 1e-9);
        assert!(c.lobe_balance_holds);
        assert!(c.origin_starts_j && c.min_slope_at_origin_positive);
    }

    #[test]
    fn all_of_j_is_trivially_balanced() {
        let cfg = presets::symmetric(presets::linear(1.0), 2.0);
        let regions = decompose_regions(&cfg.potentials, 256);
        let c = check_corollary_conditions(&cfg.potentials, &regions, &cfg.rates);
        assert!(c.lobe_balance.is_empty() && c.lobe_balance_holds);
        assert_eq!(c.strong_deficit, 0.0);
        assert!(c.strong_budget_holds && (c.strong_gain - 1.0).abs() < 1e-10);
    }

    #[test]
    fn flat_report_has_no_motor_effect() {
        let r =
            motor_effect_report(&presets::flat(), build_grid(128).unwrap(), 0.05, 0.05).unwrap();
        assert!(!r.motor_effect);
        assert!(r.limit.is_none() && r.limit_note.is_some());
        let json = r.to_json();
        assert!(json.contains("\"motor_effect\": false"));
    }
}
