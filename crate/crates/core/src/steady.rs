//! Positive steady states: direct null vector, parabolic relaxation, and a
//! Newton solver on the phase variables `R_i = −σ ln n_i` for the regime where
//! the densities themselves underflow.

use serde::Serialize;

use crate::discretize::{adjoint_consistency, assemble_operator, Grid, SparseOperator};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, Normalization};
use crate::numerics::special::{exp_capped, ln_bernoulli, log_sum_exp_weighted};
use crate::numerics::{gth_null_vector, BandMatrix};
use crate::phase::to_phase;

/// Smallest density accepted as representable.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// Largest `max(R) − min(R)` in units of `σ` for which densities are formed.
pub const REPRESENTABLE_SPAN: f64 = 690.0;

/// Newton tolerance on the max-norm of the phase residual.
pub const NEWTON_TOL: f64 = 1e-9;

/// Grid samples of the densities `n_i(x_m)`, indexed `[i][m]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityField {
    pub grid: Grid,
    pub sigma: f64,
    pub values: Vec<Vec<f64>>,
    pub normalization: Normalization,
}

impl DensityField {
    pub fn species_count(&self) -> usize {
        self.values.len()
    }

    /// `Σ_i n_i(x_m)`.
    pub fn total(&self) -> Vec<f64> {
        (0..self.grid.node_count())
            .map(|m| self.values.iter().map(|v| v[m]).sum())
            .collect()
    }

    /// Trapezoidal `∫ Σ_i n_i`.
    pub fn mass(&self) -> f64 {
        trapezoid_mass(&self.grid, &self.total())
    }

    /// Rescaled copy satisfying `normalization`.
    pub fn normalized(&self, normalization: Normalization) -> Result<Self> {
        let scale = match normalization {
            Normalization::UnitMass => self.mass(),
            Normalization::UnitAtOrigin => self.values.iter().map(|v| v[0]).sum(),
        };
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::solver(format!(
                "cannot normalize a density with scale {scale}"
            )));
        }
        Ok(Self {
            values: self
                .values
                .iter()
                .map(|v| v.iter().map(|x| x / scale).collect())
                .collect(),
            normalization,
            ..self.clone()
        })
    }

    /// Node-major flattening matching the operator layout.
    pub fn node_major(&self) -> Vec<f64> {
        let ni = self.species_count();
        let mut out = vec![0.0; ni * self.grid.node_count()];
        for (i, v) in self.values.iter().enumerate() {
            for (m, x) in v.iter().enumerate() {
                out[m * ni + i] = *x;
            }
        }
        out
    }

    fn from_node_major(
        grid: Grid,
        sigma: f64,
        ni: usize,
        flat: &[f64],
        normalization: Normalization,
    ) -> Self {
        let values = (0..ni)
            .map(|i| (0..grid.node_count()).map(|m| flat[m * ni + i]).collect())
            .collect();
        Self {
            grid,
            sigma,
            values,
            normalization,
        }
    }
}

fn trapezoid_mass(grid: &Grid, total: &[f64]) -> f64 {
    crate::numerics::trapezoid(total, grid.h())
}

/// Grid samples of `R_i = −σ ln n_i`, `[i][m]`, and `S = −σ ln Σ_i n_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseField {
    pub grid: Grid,
    pub sigma: f64,
    pub r_values: Vec<Vec<f64>>,
    pub s_values: Vec<f64>,
    pub normalization: Normalization,
    /// Set when a capped exponential was active at convergence.
    pub untrusted: bool,
}

impl PhaseField {
    /// Builds the field from phases, computing `S` stably.
    pub fn from_phases(
        grid: Grid,
        sigma: f64,
        r_values: Vec<Vec<f64>>,
        normalization: Normalization,
    ) -> Self {
        let s_values = (0..grid.node_count())
            .map(|m| -sigma * log_sum_exp_weighted(r_values.iter().map(|r| (1.0, -r[m] / sigma))))
            .collect();
        Self {
            grid,
            sigma,
            r_values,
            s_values,
            normalization,
            untrusted: false,
        }
    }

    pub fn species_count(&self) -> usize {
        self.r_values.len()
    }

    /// `min_i R_i(x_m)`.
    pub fn min_phase(&self) -> Vec<f64> {
        (0..self.grid.node_count())
            .map(|m| {
                self.r_values
                    .iter()
                    .map(|r| r[m])
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    /// `(max − min)` of all phases divided by `σ`.
    pub fn span_over_sigma(&self) -> f64 {
        let (lo, hi) = self
            .r_values
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        (hi - lo) / self.sigma
    }

    /// `exp(−R/σ)`; entries below the floor become zero.
    pub fn to_density(&self) -> DensityField {
        DensityField {
            grid: self.grid,
            sigma: self.sigma,
            values: self
                .r_values
                .iter()
                .map(|r| r.iter().map(|v| (-v / self.sigma).exp()).collect())
                .collect(),
            normalization: self.normalization,
        }
    }

    /// Copy shifted by a common constant so that `normalization` holds.
    pub fn normalized(&self, normalization: Normalization) -> Self {
        let shift = normalization_shift(&self.grid, self.sigma, &self.r_values, normalization);
        let r = self
            .r_values
            .iter()
            .map(|v| v.iter().map(|x| x + shift).collect())
            .collect();
        let mut out = Self::from_phases(self.grid, self.sigma, r, normalization);
        out.untrusted = self.untrusted;
        out
    }
}

/// The constant `c` with `R + c` normalized; exact because the phase
/// system is invariant under a common shift.
fn normalization_shift(grid: &Grid, sigma: f64, r: &[Vec<f64>], norm: Normalization) -> f64 {
    let lse = match norm {
        Normalization::UnitAtOrigin => log_sum_exp_weighted(r.iter().map(|v| (1.0, -v[0] / sigma))),
        Normalization::UnitMass => {
            let h = grid.h();
            log_sum_exp_weighted(r.iter().flat_map(|v| {
                v.iter()
                    .enumerate()
                    .map(move |(m, x)| (grid.volume_factor(m) * h, -x / sigma))
            }))
        }
    };
    sigma * lse
}

/// Positive null vector of `op`, normalized.
///
/// The direct solve is the subtraction-free state reduction of
/// [`gth_null_vector`]; if its residual check fails, inverse iteration on a
/// slightly shifted operator is used instead.
pub fn solve_null_vector(
    op: &SparseOperator,
    normalization: Normalization,
) -> Result<DensityField> {
    let adj = adjoint_consistency(op);
    if adj > 1e-10 {
        return Err(Error::input(format!(
            "operator columns do not sum to zero (relative residual {adj:.3e})"
        )));
    }
    let a = op.matrix();
    let n = match gth_null_vector(a) {
        Ok(n) if residual_ok(a, &n) && n.iter().all(|v| *v > 0.0) => n,
        _ => inverse_iteration(a)?,
    };
    let peak = n.iter().cloned().fold(0.0, f64::max);
    if let Some(k) = n.iter().position(|v| !(*v > DENSITY_FLOOR * peak)) {
        let (m, i) = (k / op.species_count(), k % op.species_count());
        return Err(Error::solver(format!(
            "null vector not positive at node {m} (x = {}), species {}: value {:.3e} relative to peak",
            op.grid().x(m),
            i + 1,
            n[k] / peak
        )));
    }
    if !residual_ok(a, &n) {
        return Err(Error::solver("null vector residual check failed"));
    }
    DensityField::from_node_major(op.grid(), op.sigma(), op.species_count(), &n, normalization)
        .normalized(normalization)
}

fn residual_ok(a: &BandMatrix, n: &[f64]) -> bool {
    let r = a.mul_vec(n);
    let rmax = r.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let nmax = n.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    rmax.is_finite() && rmax <= 1e-10 * a.norm_inf() * nmax
}

fn inverse_iteration(a: &BandMatrix) -> Result<Vec<f64>> {
    let dim = a.dim();
    let mut shifted = a.clone();
    let eps = 1e-12 * a.norm_inf();
    for k in 0..dim {
        shifted.add(k, k, eps);
    }
    let lu = shifted.lu()?;
    let mut x = vec![1.0 / dim as f64; dim];
    for _ in 0..50 {
        let y = lu.solve(&x);
        let norm = y.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::solver("inverse iteration broke down"));
        }
        let sign = if y.iter().sum::<f64>() < 0.0 {
            -1.0
        } else {
            1.0
        };
        x = y.iter().map(|v| sign * v / norm).collect();
        if residual_ok(a, &x) {
            return Ok(x);
        }
    }
    Err(Error::NonConvergence {
        iterations: 50,
        residual: a.mul_vec(&x).iter().fold(0.0, |m: f64, v| m.max(v.abs())),
        hint: "inverse iteration for the null vector stalled".into(),
    })
}

/// Largest `dt·‖A‖_∞` accepted by [`time_march`]: beyond it `M + dt·A` is
/// numerically the singular `dt·A` and the increments carry no information.
pub const MAX_STIFFNESS: f64 = 1e10;

/// Implicit Euler for `M ∂n/∂t = −A n` (`M` the lumped control-volume mass)
/// from uniform unit-mass data, stopped once `‖Δn‖_∞ / dt ≤ tol`.
pub fn time_march(
    config: &ModelConfig,
    grid: Grid,
    sigma: f64,
    dt: f64,
    tol: f64,
    max_steps: usize,
) -> Result<DensityField> {
    if !(dt > 0.0 && dt.is_finite()) || !(tol > 0.0) {
        return Err(Error::input("time step and tolerance must be positive"));
    }
    let op = assemble_operator(config, grid, sigma)?;
    let a = op.matrix();
    if dt * a.norm_inf() > MAX_STIFFNESS {
        return Err(Error::input(format!(
            "time step {dt} too large: dt·‖A‖ = {:.3e} exceeds {MAX_STIFFNESS:.0e}",
            dt * a.norm_inf()
        )));
    }
    let ni = config.species_count();
    let mass: Vec<f64> = (0..op.dim()).map(|k| grid.volume_factor(k / ni)).collect();
    let mut system = a.clone();
    for k in 0..op.dim() {
        for c in system.row_cols(k) {
            let v = system.get(k, c) * dt;
            system.set(k, c, v);
        }
        system.add(k, k, mass[k]);
    }
    let lu = system.lu()?;
    let mut n = vec![1.0 / ni as f64; op.dim()];
    let mut last = f64::INFINITY;
    for _ in 0..max_steps {
        let rhs: Vec<f64> = n.iter().zip(&mass).map(|(v, w)| v * w).collect();
        let next = lu.solve(&rhs);
        last = next
            .iter()
            .zip(&n)
            .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()))
            / dt;
        n = next;
        if last <= tol {
            return DensityField::from_node_major(grid, sigma, ni, &n, config.normalization)
                .normalized(config.normalization);
        }
    }
    Err(Error::NonConvergence {
        iterations: max_steps,
        residual: last,
        hint: "increase max_steps or dt".into(),
    })
}

/// Discrete phase system, obtained from the density rows by `n = e^{−R/σ}`:
///
/// ```text
/// F_{i,m} = −(σ²/h²)·[B(δ₊)(1 − e^{−g₊}) + B(−δ₋)(1 − e^{g₋})]
///           − σ c_m ν_ii + σ c_m Σ_{j≠i} ν_ij e^{(R_i − R_j)/σ}
/// ```
///
/// with `g₊ = (u_{m+1} − u_m)/σ`, `g₋ = (u_m − u_{m−1})/σ` and `u = R − ψ`.
/// Terms of missing boundary interfaces are dropped.
pub(crate) struct PhaseSystem {
    grid: Grid,
    sigma: f64,
    ni: usize,
    /// `ψ_i(x_m)`, `[i][m]`.
    psi: Vec<Vec<f64>>,
    /// `(ln B(δ), ln B(−δ))` per species and interface.
    ln_weights: Vec<Vec<(f64, f64)>>,
    /// Coupling matrices `c_m·ν_ij(x_m)·scale` per node, row-major.
    coupling: Vec<Vec<f64>>,
}

pub(crate) struct Evaluation {
    pub residual: Vec<f64>,
    /// Per-row rounding level of the residual evaluation.
    pub floor: Vec<f64>,
    pub jacobian: Option<BandMatrix>,
    pub capped: bool,
}

impl Evaluation {
    /// Whether every row is below `max(tol, floor)`.
    fn converged(&self, tol: f64) -> bool {
        self.residual
            .iter()
            .zip(&self.floor)
            .all(|(r, f)| r.abs() <= tol.max(*f))
    }
}

impl PhaseSystem {
    pub fn new(config: &ModelConfig, grid: Grid, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::input(format!("sigma must be positive, got {sigma}")));
        }
        let ni = config.species_count();
        let nodes = grid.nodes();
        let psi: Vec<Vec<f64>> = (0..ni)
            .map(|i| {
                nodes
                    .iter()
                    .map(|&x| config.potentials.get(i).value(x))
                    .collect()
            })
            .collect();
        let ln_weights = psi
            .iter()
            .map(|p| {
                p.windows(2)
                    .map(|w| {
                        let d = (w[1] - w[0]) / sigma;
                        (ln_bernoulli(d), ln_bernoulli(-d))
                    })
                    .collect()
            })
            .collect();
        let scale = config.rates.coupling_scale(sigma);
        let coupling = nodes
            .iter()
            .enumerate()
            .map(|(m, &x)| {
                let c = grid.volume_factor(m) * scale;
                (0..ni * ni)
                    .map(|k| c * config.rates.nu(k / ni, k % ni, x))
                    .collect()
            })
            .collect();
        Ok(Self {
            grid,
            sigma,
            ni,
            psi,
            ln_weights,
            coupling,
        })
    }

    #[inline]
    fn idx(&self, i: usize, m: usize) -> usize {
        m * self.ni + i
    }

    /// Residual (node-major) and optionally the Jacobian in `R`.
    pub fn evaluate(&self, r: &[Vec<f64>], with_jacobian: bool) -> Evaluation {
        let (ni, cells, sigma) = (self.ni, self.grid.cells(), self.sigma);
        let h = self.grid.h();
        let kt = sigma * sigma / (h * h);
        let kd = sigma / (h * h);
        let dim = ni * (cells + 1);
        let mut res = vec![0.0; dim];
        // absolute sizes of plain terms and of exponential terms per row
        let mut plain = vec![0.0; dim];
        let mut expo = vec![0.0; dim];
        let mut jac = with_jacobian.then(|| BandMatrix::zeros(dim, ni, ni));
        let mut capped = false;
        for i in 0..ni {
            let (rv, pv) = (&r[i], &self.psi[i]);
            for m in 0..cells {
                // interface m+1/2, seen from node m (forward) and node m+1 (backward)
                let g = ((rv[m + 1] - pv[m + 1]) - (rv[m] - pv[m])) / sigma;
                let (lbp, lbm) = self.ln_weights[i][m];
                let bp = lbp.exp();
                let bm = lbm.exp();
                let (ep, dep, c1) = exp_capped(lbp - g);
                let (em, dem, c2) = exp_capped(lbm + g);
                capped |= c1 | c2;
                // node m: −kt·(B(δ) − B(δ)e^{−g})
                res[self.idx(i, m)] -= kt * (bp - ep);
                // node m+1: −kt·(B(−δ) − B(−δ)e^{g})
                res[self.idx(i, m + 1)] -= kt * (bm - em);
                plain[self.idx(i, m)] += kt * bp;
                plain[self.idx(i, m + 1)] += kt * bm;
                expo[self.idx(i, m)] += kt * ep;
                expo[self.idx(i, m + 1)] += kt * em;
                if let Some(j) = jac.as_mut() {
                    let (a, b) = (self.idx(i, m), self.idx(i, m + 1));
                    // ∂/∂g of node m term: −kt·dep;  ∂g/∂R_{m+1} = 1/σ
                    j.add(a, b, -kd * dep);
                    j.add(a, a, kd * dep);
                    // node m+1 term: +kt·dem·∂g
                    j.add(b, b, kd * dem);
                    j.add(b, a, -kd * dem);
                }
            }
        }
        for m in 0..=cells {
            let nu = &self.coupling[m];
            for i in 0..ni {
                let row = self.idx(i, m);
                res[row] -= sigma * nu[i * ni + i];
                plain[row] += sigma * nu[i * ni + i];
                for j in 0..ni {
                    let c = nu[i * ni + j];
                    if j == i || c == 0.0 {
                        continue;
                    }
                    let (e, de, cap) = exp_capped((r[i][m] - r[j][m]) / sigma);
                    capped |= cap;
                    res[row] += sigma * c * e;
                    expo[row] += sigma * c * e;
                    if let Some(jm) = jac.as_mut() {
                        jm.add(row, row, c * de);
                        jm.add(row, self.idx(j, m), -c * de);
                    }
                }
            }
        }
        // exponents are differences of stored phases, each known to one ulp
        let magnitude = r.iter().flatten().fold(0.0, |a: f64, v| a.max(v.abs()))
            + self
                .psi
                .iter()
                .flatten()
                .fold(0.0, |a: f64, v| a.max(v.abs()));
        let arg_err = 4.0 * f64::EPSILON * magnitude / sigma;
        let floor = plain
            .iter()
            .zip(&expo)
            .map(|(p, e)| 4.0 * f64::EPSILON * (p + e) + arg_err * e)
            .collect();
        Evaluation {
            residual: res,
            floor,
            jacobian: jac,
            capped,
        }
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Options for [`solve_phase_newton`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: NEWTON_TOL,
            max_iterations: 60,
            max_halvings: 20,
        }
    }
}

/// Newton's method on the discrete phase system, warm-started from `init`.
///
/// Converged when every row of the residual is below `tol` or below the
/// rounding level of its own evaluation, whichever is larger: exponents are
/// differences of phases divided by `σ`, so at small `σ` on fine grids one
/// ulp of `R` already moves a row by more than `1e-9`.
///
/// The system is singular along common shifts of all phases; the row of the
/// node carrying the smallest initial phase is replaced by an anchor that
/// keeps that phase fixed, and the result is shifted to `config.normalization`.
pub fn solve_phase_newton(
    config: &ModelConfig,
    grid: Grid,
    sigma: f64,
    init: &PhaseField,
) -> Result<PhaseField> {
    solve_phase_newton_with(config, grid, sigma, init, NewtonOptions::default())
}

pub fn solve_phase_newton_with(
    config: &ModelConfig,
    grid: Grid,
    sigma: f64,
    init: &PhaseField,
    opts: NewtonOptions,
) -> Result<PhaseField> {
    let ni = config.species_count();
    if init.species_count() != ni || init.grid != grid {
        return Err(Error::input(
            "initial phase does not match the configuration or grid",
        ));
    }
    if init.r_values.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::input("initial phase is not finite"));
    }
    let sys = PhaseSystem::new(config, grid, sigma)?;
    let nodes = grid.node_count();
    let mut r = init.r_values.clone();

    let first = sys.evaluate(&r, false);
    if first.converged(opts.tol) && init.sigma == sigma {
        let mut out = init.clone();
        out.untrusted = first.capped;
        return Ok(out);
    }

    // anchor at the smallest initial phase
    let (ai, am) = (0..ni)
        .flat_map(|i| (0..nodes).map(move |m| (i, m)))
        .min_by(|a, b| r[a.0][a.1].total_cmp(&r[b.0][b.1]))
        .expect("nonempty");
    let anchor_row = am * ni + ai;
    let anchor_value = r[ai][am];

    let mut eval = first;
    let mut iterations = 0;
    loop {
        let fmax = max_abs(&eval.residual);
        if eval.converged(opts.tol) {
            break;
        }
        if iterations == opts.max_iterations {
            return Err(Error::NonConvergence {
                iterations,
                residual: fmax,
                hint: format!(
                    "phase Newton at sigma = {sigma} did not converge; continue in smaller sigma steps"
                ),
            });
        }
        iterations += 1;
        let mut jac = sys.evaluate(&r, true).jacobian.expect("requested");
        let mut rhs: Vec<f64> = eval.residual.iter().map(|v| -v).collect();
        jac.clear_row(anchor_row);
        jac.set(anchor_row, anchor_row, 1.0);
        rhs[anchor_row] = anchor_value - r[ai][am];
        let step = jac.lu()?.solve(&rhs);
        if step.iter().any(|v| !v.is_finite()) {
            return Err(Error::solver(format!(
                "phase Newton produced a non-finite step at sigma = {sigma}"
            )));
        }
        let base = norm2(&eval.residual);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<Vec<f64>> = (0..ni)
                .map(|i| (0..nodes).map(|m| r[i][m] + t * step[m * ni + i]).collect())
                .collect();
            let e = sys.evaluate(&trial, false);
            let n2 = norm2(&e.residual);
            if n2.is_finite() && n2 < base {
                accepted = Some((trial, e));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((trial, e)) => {
                r = trial;
                eval = e;
            }
            None => {
                return Err(Error::NonConvergence {
                    iterations,
                    residual: fmax,
                    hint: format!(
                        "phase Newton line search failed at sigma = {sigma}; continue in smaller sigma steps"
                    ),
                })
            }
        }
    }
    let mut out = PhaseField::from_phases(grid, sigma, r, config.normalization)
        .normalized(config.normalization);
    out.untrusted = eval.capped;
    Ok(out)
}

/// Max-norm of the discrete phase residual at every node, `[i][m]`.
pub(crate) fn phase_residual_values(
    config: &ModelConfig,
    phase: &PhaseField,
) -> Result<Vec<Vec<f64>>> {
    let sys = PhaseSystem::new(config, phase.grid, phase.sigma)?;
    let e = sys.evaluate(&phase.r_values, false);
    let ni = config.species_count();
    Ok((0..ni)
        .map(|i| {
            (0..phase.grid.node_count())
                .map(|m| e.residual[m * ni + i])
                .collect()
        })
        .collect())
}

/// Which solver produced a sweep entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolvePath {
    Density,
    PhaseNewton,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub sigma: f64,
    pub path: SolvePath,
    /// Present when the densities are representable.
    pub density: Option<DensityField>,
    pub phase: PhaseField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub entries: Vec<SweepEntry>,
    /// The `σ` at which the sweep stopped, with the reason.
    pub failure: Option<(f64, Error)>,
}

impl SweepOutcome {
    pub fn into_result(self) -> Result<Vec<SweepEntry>> {
        match self.failure {
            Some((_, e)) => Err(e),
            None => Ok(self.entries),
        }
    }
}

/// Density path: null vector plus phase transform.
pub fn solve_density(
    config: &ModelConfig,
    grid: Grid,
    sigma: f64,
) -> Result<(DensityField, PhaseField)> {
    let op = assemble_operator(config, grid, sigma)?;
    let density = solve_null_vector(&op, config.normalization)?;
    let phase = to_phase(&density)?;
    Ok((density, phase))
}

/// Extrapolates a converged phase to a smaller `σ`: the common part
/// `min_i R_i` is kept and the species offsets are scaled with `σ`.
pub fn predict_phase(prev: &PhaseField, sigma: f64, normalization: Normalization) -> PhaseField {
    let base = prev.min_phase();
    let ratio = sigma / prev.sigma;
    let r = prev
        .r_values
        .iter()
        .map(|v| {
            v.iter()
                .zip(&base)
                .map(|(x, b)| b + (x - b) * ratio)
                .collect()
        })
        .collect();
    PhaseField::from_phases(prev.grid, sigma, r, normalization).normalized(normalization)
}

/// Recursion depth for bisecting a failed `σ` step.
const MAX_STEP_SPLITS: usize = 6;

fn phase_step(
    config: &ModelConfig,
    grid: Grid,
    prev: &PhaseField,
    sigma: f64,
    depth: usize,
) -> Result<PhaseField> {
    let guess = predict_phase(prev, sigma, config.normalization);
    match solve_phase_newton(config, grid, sigma, &guess) {
        Ok(p) => Ok(p),
        Err(e) if depth < MAX_STEP_SPLITS => {
            let mid = (prev.sigma * sigma).sqrt();
            let half = phase_step(config, grid, prev, mid, depth + 1).map_err(|_| e)?;
            phase_step(config, grid, &half, sigma, depth + 1)
        }
        Err(e) => Err(e),
    }
}

/// Solves for every `σ` in `sigmas` (strictly descending), warm-starting
/// each phase solve from the previous one. Densities are formed directly
/// while `e^{−R/σ}` stays representable; below that the phase Newton path
/// takes over. The first failure stops the sweep.
pub fn continuation_sweep(
    config: &ModelConfig,
    grid: Grid,
    sigmas: &[f64],
) -> Result<SweepOutcome> {
    if sigmas.is_empty() {
        return Err(Error::input("sigma list is empty"));
    }
    if sigmas.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::input("every sigma must be positive and finite"));
    }
    if sigmas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::input("sigmas must be strictly descending"));
    }
    let mut entries: Vec<SweepEntry> = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        let step = match entries.last() {
            None => solve_density(config, grid, sigma).map(|(d, p)| SweepEntry {
                sigma,
                path: SolvePath::Density,
                density: Some(d),
                phase: p,
            }),
            Some(prev) => {
                let guess = predict_phase(&prev.phase, sigma, config.normalization);
                if guess.span_over_sigma() <= REPRESENTABLE_SPAN {
                    solve_density(config, grid, sigma).map(|(d, p)| SweepEntry {
                        sigma,
                        path: SolvePath::Density,
                        density: Some(d),
                        phase: p,
                    })
                } else {
                    phase_step(config, grid, &prev.phase, sigma, 0).map(|p| SweepEntry {
                        sigma,
                        path: SolvePath::PhaseNewton,
                        density: None,
                        phase: p,
                    })
                }
            }
        };
        match step {
            Ok(e) => entries.push(e),
            Err(e) => {
                return Ok(SweepOutcome {
                    entries,
                    failure: Some((sigma, e)),
                })
            }
        }
    }
    Ok(SweepOutcome {
        entries,
        failure: None,
    })
}

/// `σ` ladder from `start` halving down to (and ending exactly at) `target`.
pub fn sigma_ladder(start: f64, target: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut s = start;
    while s > target * 1.5 {
        out.push(s);
        s *= 0.5;
    }
    out.push(target);
    out
}

/// Resolution contract for sweeps: `N = max(512, ⌈8/σ_min⌉)`.
pub fn default_cells(sigma_min: f64) -> usize {
    512usize.max((8.0 / sigma_min).ceil() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::build_grid;
    use crate::model::{presets, Regime};

    #[test]
    fn scalar_closed_form() {
        let cfg = presets::single_linear(1.0);
        let g = build_grid(512).unwrap();
        let sigma = 0.05;
        let (d, _) = solve_density(&cfg, g, sigma).unwrap();
        for (m, x) in g.nodes().iter().enumerate() {
            let e = (-x / sigma).exp();
            assert!(((d.values[0][m] - e) / e).abs() < 1e-10, "m = {m}");
        }
    }

    #[test]
    fn symmetric_pair_closed_form() {
        let cfg = presets::symmetric(presets::cosine(0.7), 2.0);
        let g = build_grid(256).unwrap();
        let sigma = 0.03;
        let (d, _) = solve_density(&cfg, g, sigma).unwrap();
        let psi0 = cfg.potentials.get(0).value(0.0);
        for (m, &x) in g.nodes().iter().enumerate() {
            let e = 0.5 * (-(cfg.potentials.get(0).value(x) - psi0) / sigma).exp();
            for i in 0..2 {
                assert!(((d.values[i][m] - e) / e).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn residual_mass_conserved() {
        let cfg = presets::demo(Regime::Bounded);
        let g = build_grid(300).unwrap();
        let op = assemble_operator(&cfg, g, 0.05).unwrap();
        let d = solve_null_vector(&op, Normalization::UnitMass).unwrap();
        assert!((d.mass() - 1.0).abs() < 1e-12);
        let n = d.node_major();
        let r = op.apply(&n);
        let scale = op.matrix().norm_inf() * n.iter().cloned().fold(0.0, f64::max);
        assert!(r.iter().sum::<f64>().abs() < 1e-12 * scale);
    }

    #[test]
    fn time_march_flat() {
        let cfg = presets::single_linear(0.0).with_normalization(Normalization::UnitMass);
        let g = build_grid(32).unwrap();
        let d = time_march(&cfg, g, 0.1, 1.0, 1e-10, 10_000).unwrap();
        assert!(d.values[0].iter().all(|v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn time_march_matches_closed_form() {
        let cfg = presets::single_linear(1.0);
        let g = build_grid(128).unwrap();
        let tol = 1e-9;
        let d = time_march(&cfg, g, 0.05, 0.5, tol, 10_000).unwrap();
        for (m, x) in g.nodes().iter().enumerate() {
            assert!((d.values[0][m] - (-x / 0.05).exp()).abs() <= 10.0 * tol);
        }
    }

    #[test]
    fn time_march_rejects_huge_step() {
        let cfg = presets::single_linear(1.0);
        let g = build_grid(128).unwrap();
        assert!(matches!(
            time_march(&cfg, g, 0.05, 1e12, 1e-9, 10),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn newton_exact_for_single_species() {
        let cfg = presets::single_linear(1.0);
        let g = build_grid(64).unwrap();
        let sigma = 0.01;
        let exact: Vec<f64> = g.nodes();
        let init = PhaseField::from_phases(g, sigma, vec![exact.clone()], cfg.normalization);
        let out = solve_phase_newton(&cfg, g, sigma, &init).unwrap();
        assert_eq!(out, init);
        // from a perturbed start Newton recovers it
        let bumped: Vec<f64> = exact.iter().map(|x| x + 0.01 * (7.0 * x).sin()).collect();
        let init = PhaseField::from_phases(g, sigma, vec![bumped], cfg.normalization);
        let out = solve_phase_newton(&cfg, g, sigma, &init).unwrap();
        for (a, b) in out.r_values[0].iter().zip(&exact) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn paths_agree() {
        let cfg = presets::demo(Regime::Bounded);
        let g = build_grid(512).unwrap();
        let (_, p) = solve_density(&cfg, g, 0.02).unwrap();
        let guess = predict_phase(
            &solve_density(&cfg, g, 0.04).unwrap().1,
            0.02,
            cfg.normalization,
        );
        let q = solve_phase_newton(&cfg, g, 0.02, &guess).unwrap();
        for i in 0..2 {
            for (a, b) in p.r_values[i].iter().zip(&q.r_values[i]) {
                assert!((a - b).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn sweep_rejects_unsorted() {
        let cfg = presets::single_linear(1.0);
        let g = build_grid(64).unwrap();
        assert!(continuation_sweep(&cfg, g, &[0.02, 0.05]).is_err());
        assert!(continuation_sweep(&cfg, g, &[]).is_err());
    }

    #[test]
    fn ladder() {
        assert_eq!(sigma_ladder(0.05, 0.02), vec![0.05, 0.02]);
        let l = sigma_ladder(0.05, 1e-4);
        assert_eq!(*l.last().unwrap(), 1e-4);
        assert!(l.windows(2).all(|w| w[1] < w[0] && w[1] >= 0.33 * w[0]));
        assert_eq!(default_cells(1e-4), 80_000);
        assert_eq!(default_cells(0.05), 512);
    }
}
