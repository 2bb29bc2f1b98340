//! Limits of the phase functions as `σ → 0`.
//!
//! Bounded rates give explicit profiles (min-plus and three-branch slopes).
//! Strong coupling of two species gives slopes on the zero set of the
//! effective Hamiltonian. Vanishing rates give only sign constraints.

use nalgebra::Matrix3;
use serde::Serialize;

use crate::discretize::Grid;
use crate::error::{Error, Result};
use crate::model::{
    escape_failures, species_negative_sets, AssumptionReport, Interval, ModelConfig, PotentialSet,
    Regime, Region, RegionDecomposition, Theorem, DETECTION_TOLERANCE,
};
use crate::numerics::integrate;
use crate::steady::PhaseField;

const CELL_TOL: f64 = 1e-14;
const REAL_TOL: f64 = 1e-9;
const NEGATIVE_SET_SAMPLES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchLabel {
    /// `R′ = min_i (ψ′_i)_+`.
    MinPlus,
    /// `R′ = max_i ψ′_i` on a `K` interval.
    MaxNeg,
    /// `R′ = 0` on the neutral set.
    Zero,
    /// A root of the effective Hamiltonian.
    StrongRoot,
    VanishingBound,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitProfile {
    pub grid: Grid,
    pub theorem: Theorem,
    /// `R` with `R(0) = 0`.
    pub r_values: Vec<f64>,
    pub slope_values: Vec<f64>,
    pub branch_labels: Vec<BranchLabel>,
}

impl LimitProfile {
    /// `R` at `x` by linear interpolation.
    pub fn value_at(&self, x: f64) -> f64 {
        let n = self.grid.cells();
        let t = (x.clamp(0.0, 1.0) * n as f64).min(n as f64);
        let m = (t.floor() as usize).min(n - 1);
        let w = t - m as f64;
        (1.0 - w) * self.r_values[m] + w * self.r_values[m + 1]
    }
}

fn require(certificate: &AssumptionReport, theorem: Theorem) -> Result<()> {
    if certificate.applies(theorem) {
        Ok(())
    } else {
        Err(Error::input(format!(
            "the assumption report does not certify {theorem:?}; applicable: {:?}",
            certificate.applicable
        )))
    }
}

/// Integrates `slope` cell by cell, splitting cells at `breaks`.
fn integrate_cells(grid: Grid, breaks: &[f64], slope: impl Fn(f64) -> f64) -> Vec<f64> {
    let nodes = grid.nodes();
    let mut r = Vec::with_capacity(nodes.len());
    r.push(0.0);
    let mut b = 0;
    for m in 0..grid.cells() {
        let (a, c) = (nodes[m], nodes[m + 1]);
        while b < breaks.len() && breaks[b] <= a {
            b += 1;
        }
        let mut lo = a;
        let mut acc = 0.0;
        let mut k = b;
        while k < breaks.len() && breaks[k] < c {
            acc += integrate(&slope, lo, breaks[k], CELL_TOL);
            lo = breaks[k];
            k += 1;
        }
        acc += integrate(&slope, lo, c, CELL_TOL);
        r.push(r[m] + acc);
    }
    r
}

fn endpoints(intervals: &[&[Interval]]) -> Vec<f64> {
    let mut v: Vec<f64> = intervals
        .iter()
        .flat_map(|set| set.iter().flat_map(|iv| [iv.lo, iv.hi]))
        .collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// `R′ = min_i (ψ′_i)_+`, `R(0) = 0`. Needs a report certifying the min-plus
/// limit.
pub fn limit_bounded(
    pot: &PotentialSet,
    grid: Grid,
    certificate: &AssumptionReport,
) -> Result<LimitProfile> {
    require(certificate, Theorem::MinPlus)?;
    if certificate.species_count != pot.species_count() {
        return Err(Error::input(
            "assumption report belongs to another configuration",
        ));
    }
    let slope = |x: f64| pot.min_slope(x).0.max(0.0);
    let kinks = crate::model::sign_intervals(|x| pot.min_slope(x).0 > 0.0, NEGATIVE_SET_SAMPLES);
    let breaks = endpoints(&[&kinks]);
    Ok(LimitProfile {
        grid,
        theorem: Theorem::MinPlus,
        r_values: integrate_cells(grid, &breaks, slope),
        slope_values: grid.nodes().into_iter().map(slope).collect(),
        branch_labels: vec![BranchLabel::MinPlus; grid.node_count()],
    })
}

fn check_regions(pot: &PotentialSet, regions: &RegionDecomposition) -> Result<()> {
    let mut all: Vec<(Interval, &str)> = Vec::new();
    all.extend(regions.j_intervals.iter().map(|iv| (*iv, "J")));
    all.extend(regions.k_intervals.iter().map(|iv| (*iv, "K")));
    all.sort_by(|a, b| a.0.lo.total_cmp(&b.0.lo));
    for (iv, name) in &all {
        if !(0.0 <= iv.lo && iv.lo <= iv.hi && iv.hi <= 1.0) {
            return Err(Error::input(format!(
                "{name} interval [{}, {}] does not lie in [0, 1]",
                iv.lo, iv.hi
            )));
        }
        let mid = 0.5 * (iv.lo + iv.hi);
        let ok = match *name {
            "J" => pot.min_slope(mid).0 > 0.0,
            _ => pot.max_slope(mid).0 < 0.0,
        };
        if !ok && !iv.is_point() {
            return Err(Error::input(format!(
                "{name} interval [{}, {}] disagrees with the potentials at x = {mid}",
                iv.lo, iv.hi
            )));
        }
    }
    for w in all.windows(2) {
        if w[1].0.lo < w[0].0.hi {
            return Err(Error::input(format!(
                "intervals [{}, {}] and [{}, {}] overlap",
                w[0].0.lo, w[0].0.hi, w[1].0.lo, w[1].0.hi
            )));
        }
    }
    Ok(())
}

/// Three-branch profile: `min ψ′` on `J`, `max ψ′` on `K`, zero elsewhere.
/// Nodes at a junction take the branch of the interval to their right.
pub fn limit_piecewise(
    pot: &PotentialSet,
    regions: &RegionDecomposition,
    grid: Grid,
    certificate: &AssumptionReport,
) -> Result<LimitProfile> {
    require(certificate, Theorem::Piecewise)?;
    check_regions(pot, regions)?;
    let label = |x: f64| match regions.region_at(x) {
        Region::J(_) => BranchLabel::MinPlus,
        Region::K(_) => BranchLabel::MaxNeg,
        Region::Neutral => BranchLabel::Zero,
    };
    let slope_of = |x: f64, l: BranchLabel| match l {
        BranchLabel::MinPlus => pot.min_slope(x).0.max(0.0),
        BranchLabel::MaxNeg => pot.max_slope(x).0.min(0.0),
        _ => 0.0,
    };
    let breaks = endpoints(&[&regions.j_intervals, &regions.k_intervals]);
    // Inside a piece the branch is constant; evaluate it away from the ends.
    let slope = |x: f64| slope_of(x, label(x));
    let r_values = integrate_cells(grid, &breaks, slope);

    let nodes = grid.nodes();
    let h = grid.h();
    let branch_labels: Vec<BranchLabel> = nodes
        .iter()
        .map(|&x| {
            if breaks.iter().any(|b| (b - x).abs() < 1e-12) && x < 1.0 {
                label((x + 0.25 * h).min(1.0))
            } else {
                label(x)
            }
        })
        .collect();
    let slope_values = nodes
        .iter()
        .zip(&branch_labels)
        .map(|(&x, &l)| slope_of(x, l))
        .collect();
    Ok(LimitProfile {
        grid,
        theorem: Theorem::Piecewise,
        r_values,
        slope_values,
        branch_labels,
    })
}

/// Slopes and rates of the two-species effective Hamiltonian at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HamiltonianParams {
    pub psi1_slope: f64,
    pub psi2_slope: f64,
    /// Loss rate of species 1, `ν_21`.
    pub nu1: f64,
    /// Loss rate of species 2, `ν_12`.
    pub nu2: f64,
}

impl HamiltonianParams {
    pub fn new(psi1_slope: f64, psi2_slope: f64, nu1: f64, nu2: f64) -> Result<Self> {
        if !(nu1 > 0.0 && nu2 > 0.0) {
            return Err(Error::input(format!(
                "effective Hamiltonian needs positive rates, got ν1 = {nu1}, ν2 = {nu2}"
            )));
        }
        if !psi1_slope.is_finite()
            || !psi2_slope.is_finite()
            || !nu1.is_finite()
            || !nu2.is_finite()
        {
            return Err(Error::input(
                "effective Hamiltonian parameters must be finite",
            ));
        }
        Ok(Self {
            psi1_slope,
            psi2_slope,
            nu1,
            nu2,
        })
    }

    /// Parameters of a two-species configuration at `x`.
    pub fn at(config: &ModelConfig, x: f64) -> Result<Self> {
        if config.species_count() != 2 {
            return Err(Error::Unsupported(format!(
                "the effective Hamiltonian is defined for two species, not {}",
                config.species_count()
            )));
        }
        let pot = &config.potentials;
        Self::new(
            pot.get(0).slope(x),
            pot.get(1).slope(x),
            config.rates.nu(1, 0, x),
            config.rates.nu(0, 1, x),
        )
    }

    fn betas(&self, p: f64) -> (f64, f64) {
        (
            p * p - self.psi1_slope * p - self.nu1,
            p * p - self.psi2_slope * p - self.nu2,
        )
    }

    /// Coefficients `(c2, c1, c0)` of the monic cubic left after removing the
    /// root `p = 0` from `β_1β_2 − ν_1ν_2`.
    fn cubic(&self) -> (f64, f64, f64) {
        let (a, b) = (self.psi1_slope, self.psi2_slope);
        (
            -(a + b),
            a * b - self.nu1 - self.nu2,
            a * self.nu2 + b * self.nu1,
        )
    }
}

/// `H(p) = ½[β_1 + β_2 + √((β_1 − β_2)² + 4ν_1ν_2)]`, evaluated without
/// cancellation when `β_1 + β_2 < 0`.
pub fn effective_hamiltonian(p: f64, params: &HamiltonianParams) -> f64 {
    let (b1, b2) = params.betas(p);
    let sum = b1 + b2;
    let root = ((b1 - b2).powi(2) + 4.0 * params.nu1 * params.nu2).sqrt();
    if sum >= 0.0 {
        0.5 * (sum + root)
    } else {
        let c = b1 * b2 - params.nu1 * params.nu2;
        -2.0 * c / (root - sum)
    }
}

/// Branch condition `β_1 + β_2 ≤ 0`, with a rounding allowance.
fn on_branch(p: f64, params: &HamiltonianParams) -> bool {
    let (b1, b2) = params.betas(p);
    let scale = p * p
        + (params.psi1_slope.abs() + params.psi2_slope.abs()) * p.abs()
        + params.nu1
        + params.nu2;
    b1 + b2 <= 1e-12 * scale
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Root {
    p: f64,
    nontrivial: bool,
}

fn hamiltonian_roots(params: &HamiltonianParams) -> Vec<Root> {
    let (c2, c1, c0) = params.cubic();
    let companion = Matrix3::new(-c2, -c1, -c0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
    let q = |p: f64| ((p + c2) * p + c1) * p + c0;
    let dq = |p: f64| (3.0 * p + 2.0 * c2) * p + c1;
    let mut roots: Vec<Root> = companion
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() <= REAL_TOL * (1.0 + z.re.abs()))
        .map(|z| {
            let mut p = z.re;
            for _ in 0..2 {
                let d = dq(p);
                if d != 0.0 {
                    let step = q(p) / d;
                    if step.is_finite() {
                        p -= step;
                    }
                }
            }
            Root {
                p,
                nontrivial: true,
            }
        })
        .collect();
    roots.push(Root {
        p: 0.0,
        nontrivial: false,
    });
    roots.sort_by(|a, b| a.p.total_cmp(&b.p));
    let mut merged: Vec<Root> = Vec::with_capacity(roots.len());
    for r in roots {
        match merged.last_mut() {
            Some(last) if (r.p - last.p).abs() <= REAL_TOL * (1.0 + r.p.abs()) => {
                // Keep the exact zero when the trivial root is involved.
                if !r.nontrivial || !last.nontrivial {
                    last.p = if last.nontrivial { r.p } else { last.p };
                }
                last.nontrivial |= r.nontrivial;
            }
            _ => merged.push(r),
        }
    }
    merged.retain(|r| on_branch(r.p, params));
    merged
}

/// Real zeros of `H(·)`, sorted. Always contains `0`.
pub fn solve_ham_roots(params: &HamiltonianParams) -> Vec<f64> {
    hamiltonian_roots(params).into_iter().map(|r| r.p).collect()
}

/// Per-node record of the strong-coupling lower bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeBound {
    pub x: f64,
    pub slope: f64,
    pub in_j: bool,
    /// `min_i ψ′_i` on `J`, `−√k` elsewhere.
    pub lower_bound: f64,
    pub holds: bool,
    /// `½[ψ′_1 − √(ψ′_1² + 4ν_1)]` where `ψ′_1 > 0`; diagnostic only.
    pub diagnostic_bound: Option<f64>,
    pub hamiltonian: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCertificate {
    pub k: f64,
    pub nodes: Vec<NodeBound>,
}

impl BoundCertificate {
    pub fn violations(&self) -> usize {
        self.nodes.iter().filter(|n| !n.holds).count()
    }

    pub fn holds(&self) -> bool {
        self.violations() == 0
    }

    pub fn max_hamiltonian(&self) -> f64 {
        self.nodes
            .iter()
            .map(|n| n.hamiltonian.abs())
            .fold(0.0, f64::max)
    }

    /// Nodes where the selected slope sits below the diagnostic bound.
    pub fn diagnostic_failures(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.diagnostic_bound.is_some_and(|b| n.slope < b - 1e-12))
            .count()
    }
}

/// Lower bound on `R′` at `x`: `min_i ψ′_i` on `J`, `−√k` elsewhere.
pub fn strong_lower_bound(config: &ModelConfig, regions: &RegionDecomposition, x: f64) -> f64 {
    if regions.in_j(x) {
        config.potentials.min_slope(x).0
    } else {
        -config.rates.lower_bound_k().sqrt()
    }
}

/// Selects a Hamiltonian root at every node and certifies the lower bounds.
///
/// Admissible roots satisfy the bound at the node. Among them, roots of the
/// deflated cubic are preferred over the trivial `p = 0`, then the one closest
/// to the previous node's slope; the first node takes the smallest magnitude.
/// The rule is a heuristic: the limit theorem proves bounds, not a selection.
pub fn limit_strong(
    config: &ModelConfig,
    regions: &RegionDecomposition,
    grid: Grid,
) -> Result<(LimitProfile, BoundCertificate)> {
    if config.species_count() != 2 {
        return Err(Error::Unsupported(format!(
            "strong-coupling limits need two species, got {}",
            config.species_count()
        )));
    }
    if config.regime() != Regime::Strong {
        return Err(Error::input(format!(
            "strong-coupling limit requested for a {} configuration",
            config.regime()
        )));
    }
    check_regions(&config.potentials, regions)?;
    let k = config.rates.lower_bound_k();
    let mut prev: Option<f64> = None;
    let mut nodes = Vec::with_capacity(grid.node_count());
    for x in grid.nodes() {
        let params = HamiltonianParams::at(config, x)?;
        let roots = hamiltonian_roots(&params);
        let bound = strong_lower_bound(config, regions, x);
        let admissible: Vec<Root> = roots
            .iter()
            .copied()
            .filter(|r| r.p >= bound - 1e-12 * (1.0 + bound.abs()))
            .collect();
        let pool: Vec<Root> = if admissible.iter().any(|r| r.nontrivial) {
            admissible.into_iter().filter(|r| r.nontrivial).collect()
        } else if !admissible.is_empty() {
            admissible
        } else {
            roots
        };
        let target = prev.unwrap_or(0.0);
        let slope = pool
            .iter()
            .map(|r| r.p)
            .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
            .expect("zero is always a root");
        prev = Some(slope);
        let a1 = params.psi1_slope;
        nodes.push(NodeBound {
            x,
            slope,
            in_j: regions.in_j(x),
            lower_bound: bound,
            holds: slope >= bound - 1e-12 * (1.0 + bound.abs()),
            diagnostic_bound: (a1 > 0.0).then(|| 0.5 * (a1 - (a1 * a1 + 4.0 * params.nu1).sqrt())),
            hamiltonian: effective_hamiltonian(slope, &params),
        });
    }
    let slope_values: Vec<f64> = nodes.iter().map(|n| n.slope).collect();
    let h = grid.h();
    let mut r_values = vec![0.0; grid.node_count()];
    for m in 0..grid.cells() {
        r_values[m + 1] = r_values[m] + 0.5 * h * (slope_values[m] + slope_values[m + 1]);
    }
    Ok((
        LimitProfile {
            grid,
            theorem: Theorem::StrongCoupling,
            r_values,
            slope_values,
            branch_labels: vec![BranchLabel::StrongRoot; grid.node_count()],
        },
        BoundCertificate { k, nodes },
    ))
}

/// Admissible slope range of one species at one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignConstraint {
    pub lower: f64,
    /// `None` means unbounded above.
    pub upper: Option<f64>,
    /// The node lies in one of the species' negative-slope sets `K_i^α`.
    pub on_negative_set: bool,
}

impl SignConstraint {
    fn admits(&self, slope: f64, slack: f64) -> bool {
        slope >= self.lower - slack && self.upper.is_none_or(|u| slope <= u + slack)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VanishingBounds {
    pub grid: Grid,
    /// `[i][m]`.
    pub constraints: Vec<Vec<SignConstraint>>,
    pub negative_sets: Vec<Vec<Interval>>,
    /// `min_i ψ′_i` where the node is in `∪J`, the target of `(min_i R_i)′`.
    pub j_target: Vec<Option<f64>>,
}

/// Sign constraints of each `R_i`: `R_i′ ∈ [ψ′_i, 0]` on its negative-slope
/// sets and `R_i′ ≥ 0` elsewhere, from `|R_i′|² − ψ′_i R_i′ ≤ 0`.
pub fn limit_vanishing_bounds(config: &ModelConfig, grid: Grid) -> Result<VanishingBounds> {
    if config.regime() != Regime::Vanishing {
        return Err(Error::input(format!(
            "vanishing-rate bounds requested for a {} configuration",
            config.regime()
        )));
    }
    let failures = escape_failures(config, DETECTION_TOLERANCE);
    if let Some(f) = failures.first() {
        return Err(Error::input(format!(
            "species {} has slope below zero on [{:.6}, {:.6}] with no species to escape to",
            f.species + 1,
            f.interval.lo,
            f.interval.hi
        )));
    }
    let pot = &config.potentials;
    let nodes = grid.nodes();
    let negative_sets: Vec<Vec<Interval>> = (0..config.species_count())
        .map(|i| species_negative_sets(pot, i, NEGATIVE_SET_SAMPLES))
        .collect();
    let constraints = negative_sets
        .iter()
        .enumerate()
        .map(|(i, sets)| {
            nodes
                .iter()
                .map(|&x| {
                    if sets.iter().any(|iv| iv.contains(x)) {
                        SignConstraint {
                            lower: pot.get(i).slope(x),
                            upper: Some(0.0),
                            on_negative_set: true,
                        }
                    } else {
                        SignConstraint {
                            lower: 0.0,
                            upper: None,
                            on_negative_set: false,
                        }
                    }
                })
                .collect()
        })
        .collect();
    let j_target = nodes
        .iter()
        .map(|&x| {
            let m = pot.min_slope(x).0;
            (m > DETECTION_TOLERANCE).then_some(m)
        })
        .collect();
    Ok(VanishingBounds {
        grid,
        constraints,
        negative_sets,
        j_target,
    })
}

/// One cell whose slope no nearby constraint admits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignViolation {
    pub cell: usize,
    pub x: f64,
    pub slope: f64,
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignCheck {
    pub species: usize,
    pub spatial_tolerance: f64,
    pub value_slack: f64,
    pub violations: Vec<SignViolation>,
}

impl SignCheck {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the cell slopes of every `R_i` against the constraints. A slope
/// passes if a node within `spatial_tolerance` of the cell midpoint admits
/// it up to `h²·Lip(ψ′) + 1e-9·(1 + max|ψ′|)`.
pub fn check_sign_constraints(
    bounds: &VanishingBounds,
    phase: &PhaseField,
    pot: &PotentialSet,
    spatial_tolerance: f64,
) -> Result<Vec<SignCheck>> {
    if phase.grid != bounds.grid {
        return Err(Error::input(
            "phase and constraints live on different grids",
        ));
    }
    if phase.species_count() != bounds.constraints.len() {
        return Err(Error::input(
            "phase and constraints disagree on the species count",
        ));
    }
    let grid = bounds.grid;
    let h = grid.h();
    let steepest = (0..pot.species_count())
        .map(|i| pot.max_abs_slope(i))
        .fold(0.0, f64::max);
    let slack = h * h * pot.slope_lipschitz() + 1e-9 * (1.0 + steepest);
    let reach = (spatial_tolerance / h).floor() as usize;
    Ok(bounds
        .constraints
        .iter()
        .enumerate()
        .map(|(i, cons)| {
            let r = &phase.r_values[i];
            let mut violations = Vec::new();
            for m in 0..grid.cells() {
                let slope = (r[m + 1] - r[m]) / h;
                let lo = m.saturating_sub(reach);
                let hi = (m + 1 + reach).min(grid.cells());
                if !cons[lo..=hi].iter().any(|c| c.admits(slope, slack)) {
                    let own = [cons[m], cons[m + 1]];
                    let excess = own
                        .iter()
                        .map(|c| {
                            (c.lower - slope).max(c.upper.map_or(f64::NEG_INFINITY, |u| slope - u))
                        })
                        .fold(f64::INFINITY, f64::min);
                    violations.push(SignViolation {
                        cell: m,
                        x: (m as f64 + 0.5) * h,
                        slope,
                        excess,
                    });
                }
            }
            SignCheck {
                species: i,
                spatial_tolerance,
                value_slack: slack,
                violations,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HjResidual {
    /// `|R′|² + max_i(−ψ′_i R′)` at every node.
    pub values: Vec<f64>,
    /// Nodes next to a change of branch label.
    pub junction_nodes: Vec<usize>,
    pub interior_max: f64,
    pub junction_max: f64,
}

impl HjResidual {
    pub fn max_abs(&self) -> f64 {
        self.interior_max.max(self.junction_max)
    }
}

/// Residual of `|R′|² + max_i(−ψ′_i R′) = 0` on a bounded-rate profile.
pub fn hj_residual(profile: &LimitProfile, pot: &PotentialSet) -> HjResidual {
    let nodes = profile.grid.nodes();
    let values: Vec<f64> = nodes
        .iter()
        .zip(&profile.slope_values)
        .map(|(&x, &p)| {
            let hmax = (0..pot.species_count())
                .map(|i| -pot.get(i).slope(x) * p)
                .fold(f64::NEG_INFINITY, f64::max);
            p * p + hmax
        })
        .collect();
    let labels = &profile.branch_labels;
    let last = labels.len() - 1;
    let junction_nodes: Vec<usize> = (0..=last)
        .filter(|&m| {
            (m > 0 && labels[m - 1] != labels[m]) || (m < last && labels[m + 1] != labels[m])
        })
        .collect();
    let mut interior_max: f64 = 0.0;
    let mut junction_max: f64 = 0.0;
    for (m, v) in values.iter().enumerate() {
        if junction_nodes.binary_search(&m).is_ok() {
            junction_max = junction_max.max(v.abs());
        } else {
            interior_max = interior_max.max(v.abs());
        }
    }
    HjResidual {
        values,
        junction_nodes,
        interior_max,
        junction_max,
    }
}

/// Whatever limit object the most specific applicable theorem provides.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LimitOutcome {
    Profile(LimitProfile),
    Strong {
        profile: LimitProfile,
        certificate: BoundCertificate,
    },
    Vanishing(VanishingBounds),
}

impl LimitOutcome {
    pub fn profile(&self) -> Option<&LimitProfile> {
        match self {
            LimitOutcome::Profile(p) | LimitOutcome::Strong { profile: p, .. } => Some(p),
            LimitOutcome::Vanishing(_) => None,
        }
    }
}

/// Builds the limit of [`AssumptionReport::primary_theorem`].
pub fn applicable_limit(
    config: &ModelConfig,
    regions: &RegionDecomposition,
    grid: Grid,
    report: &AssumptionReport,
) -> Result<LimitOutcome> {
    match report.primary_theorem() {
        Some(Theorem::StrongCoupling) => {
            let (profile, certificate) = limit_strong(config, regions, grid)?;
            Ok(LimitOutcome::Strong {
                profile,
                certificate,
            })
        }
        Some(Theorem::VanishingRates) => {
            limit_vanishing_bounds(config, grid).map(LimitOutcome::Vanishing)
        }
        Some(Theorem::MinPlus) => {
            limit_bounded(&config.potentials, grid, report).map(LimitOutcome::Profile)
        }
        Some(Theorem::Piecewise) => {
            limit_piecewise(&config.potentials, regions, grid, report).map(LimitOutcome::Profile)
        }
        None => Err(Error::input(
            "no limit theorem applies to this configuration; see the assumption report",
        )),
    }
}
