//! Uniform grid and the exponentially fitted finite-volume operator.
//!
//! Unknowns are ordered node-major, `index = m·I + i`, so the operator is a
//! band matrix with `I` sub- and super-diagonals. The drift–diffusion part of
//! species `i` at node `m` is `(F_{m+1/2} − F_{m−1/2})/h` with the
//! Scharfetter–Gummel interface flux
//!
//! ```text
//! F_{m+1/2} = (σ/h)·[B(δ)·n_m − B(−δ)·n_{m+1}],   δ = (ψ(x_{m+1}) − ψ(x_m))/σ,
//! ```
//!
//! `B(x) = x/(eˣ − 1)`. Boundary nodes own half a cell, so their coupling
//! terms carry a factor ½ and the missing outer flux is zero.

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{validate_rates, ModelConfig, RateViolation, Regime};
use crate::numerics::special::bernoulli;
use crate::numerics::BandMatrix;

/// Uniform grid `x_m = m/N`, `m = 0..=N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Grid {
    cells: usize,
}

impl Grid {
    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn node_count(&self) -> usize {
        self.cells + 1
    }

    pub fn h(&self) -> f64 {
        1.0 / self.cells as f64
    }

    pub fn x(&self, m: usize) -> f64 {
        m as f64 / self.cells as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.cells).map(|m| self.x(m)).collect()
    }

    /// Control-volume weight of node `m` relative to `h`.
    pub fn volume_factor(&self, m: usize) -> f64 {
        if m == 0 || m == self.cells {
            0.5
        } else {
            1.0
        }
    }
}

pub fn build_grid(cells: usize) -> Result<Grid> {
    if cells < 4 {
        return Err(Error::input(format!(
            "grid needs at least 4 cells, got {cells}"
        )));
    }
    Ok(Grid { cells })
}

/// Name of the interface-flux scheme.
pub const SCHEME: &str = "scharfetter-gummel";

/// The assembled stationary operator with the data needed to recover fluxes.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    matrix: BandMatrix,
    grid: Grid,
    species_count: usize,
    sigma: f64,
    regime: Regime,
    /// `(B(δ), B(−δ))` per species and interface, index `i·N + m`.
    weights: Vec<(f64, f64)>,
}

impl SparseOperator {
    pub fn matrix(&self) -> &BandMatrix {
        &self.matrix
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn species_count(&self) -> usize {
        self.species_count
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn scheme(&self) -> &'static str {
        SCHEME
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    #[inline]
    pub fn index(&self, i: usize, m: usize) -> usize {
        m * self.species_count + i
    }

    pub fn apply(&self, n: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(n)
    }

    /// Interface fluxes `F_{i, m+1/2}` for a node-major state, `[i][m]`.
    pub fn interface_fluxes(&self, n: &[f64]) -> Vec<Vec<f64>> {
        let cells = self.grid.cells();
        let k = self.sigma / self.grid.h();
        (0..self.species_count)
            .map(|i| {
                (0..cells)
                    .map(|m| {
                        let (bp, bm) = self.weights[i * cells + m];
                        k * (bp * n[self.index(i, m)] - bm * n[self.index(i, m + 1)])
                    })
                    .collect()
            })
            .collect()
    }

    /// Magnitude of the two terms of each flux, summed over species, `[m]`.
    /// The natural scale against which a cancelling total flux is judged.
    pub fn flux_scale(&self, n: &[f64]) -> Vec<f64> {
        let cells = self.grid.cells();
        let k = self.sigma / self.grid.h();
        (0..cells)
            .map(|m| {
                (0..self.species_count)
                    .map(|i| {
                        let (bp, bm) = self.weights[i * cells + m];
                        k * (bp * n[self.index(i, m)].abs() + bm * n[self.index(i, m + 1)].abs())
                    })
                    .sum()
            })
            .collect()
    }

    /// Writes `row col value` lines, one per nonzero.
    pub fn write_triplets(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(
            w,
            "# dim {} species {} cells {} sigma {:.16e} regime {} scheme {}",
            self.dim(),
            self.species_count,
            self.grid.cells(),
            self.sigma,
            self.regime,
            SCHEME
        )?;
        for (r, c, v) in self.matrix.triplets() {
            writeln!(w, "{r} {c} {v:.16e}")?;
        }
        Ok(())
    }

    /// Testing hook: a copy with one entry perturbed.
    pub fn perturbed(&self, row: usize, col: usize, delta: f64) -> Self {
        let mut out = self.clone();
        out.matrix.add(row, col, delta);
        out
    }
}

/// Assembles the operator of the stationary system; in the strong regime the
/// coupling terms are scaled by `1/σ`.
pub fn assemble_operator(config: &ModelConfig, grid: Grid, sigma: f64) -> Result<SparseOperator> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::input(format!("sigma must be positive, got {sigma}")));
    }
    if let Some(v) = validate_rates(&config.rates)
        .violations
        .into_iter()
        .find(|v| matches!(v, RateViolation::DiagonalMismatch { .. }))
    {
        return Err(Error::input(format!("rates do not conserve mass: {v}")));
    }
    let ni = config.species_count();
    let cells = grid.cells();
    let h = grid.h();
    let nodes = grid.nodes();
    let mut a = BandMatrix::zeros(ni * (cells + 1), ni, ni);
    let mut weights = Vec::with_capacity(ni * cells);
    let idx = |i: usize, m: usize| m * ni + i;

    let k = sigma / (h * h);
    for i in 0..ni {
        let pot = config.potentials.get(i);
        let psi: Vec<f64> = nodes.iter().map(|&x| pot.value(x)).collect();
        for m in 0..cells {
            let delta = (psi[m + 1] - psi[m]) / sigma;
            let (bp, bm) = (bernoulli(delta), bernoulli(-delta));
            weights.push((bp, bm));
            // flux leaves node m and enters node m+1
            let (l, r) = (idx(i, m), idx(i, m + 1));
            a.add(l, l, k * bp);
            a.add(l, r, -k * bm);
            a.add(r, l, -k * bp);
            a.add(r, r, k * bm);
        }
    }

    let scale = config.rates.coupling_scale(sigma);
    for (m, &x) in nodes.iter().enumerate() {
        let c = grid.volume_factor(m) * scale;
        for i in 0..ni {
            for j in 0..ni {
                let nu = config.rates.nu(i, j, x);
                if nu == 0.0 {
                    continue;
                }
                if i == j {
                    a.add(idx(i, m), idx(i, m), c * nu);
                } else {
                    a.add(idx(i, m), idx(j, m), -c * nu);
                }
            }
        }
    }

    Ok(SparseOperator {
        matrix: a,
        grid,
        species_count: ni,
        sigma,
        regime: config.regime(),
        weights,
    })
}

/// `‖Aᵀ·1‖_∞ / max|a_ij|`: zero for an exactly mass-conserving operator.
pub fn adjoint_consistency(op: &SparseOperator) -> f64 {
    let ones = vec![1.0; op.dim()];
    let r = op.matrix.mul_transpose_vec(&ones);
    let max = r.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let scale = op.matrix.max_abs();
    if scale == 0.0 {
        max
    } else {
        max / scale
    }
}
