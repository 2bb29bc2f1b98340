//! Banded matrices: LU with partial pivoting and the subtraction-free
//! null-vector elimination used for singular M-matrices.

use crate::error::{Error, Result};

/// Square band matrix with `kl` sub- and `ku` super-diagonals, stored by rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.kl + self.ku + 1) + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i < self.n && j < self.n && self.in_band(i, j) {
            self.data[self.idx(i, j)]
        } else {
            0.0
        }
    }

    /// Adds `v` to entry `(i, j)`. Panics outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    /// Column range of row `i` inside the band.
    pub fn row_cols(&self, i: usize) -> std::ops::RangeInclusive<usize> {
        i.saturating_sub(self.kl)..=(i + self.ku).min(self.n - 1)
    }

    /// Clears row `i`.
    pub fn clear_row(&mut self, i: usize) {
        for j in self.row_cols(i) {
            self.set(i, j, 0.0);
        }
    }

    /// Nonzero triplets `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in self.row_cols(i) {
                let v = self.get(i, j);
                if v != 0.0 {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| self.row_cols(i).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    pub fn mul_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            for j in self.row_cols(i) {
                y[j] += self.get(i, j) * x[i];
            }
        }
        y
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row_cols(i).map(|j| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// LU factorization with partial pivoting.
    pub fn lu(&self) -> Result<BandLu> {
        BandLu::factor(self)
    }
}

/// LU factors of a [`BandMatrix`] with row pivoting (LAPACK `gbtrf` layout
/// in spirit: U gains `kl` extra super-diagonals of fill).
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    // row i holds columns [i - kl, i + kl + ku]
    work: Vec<f64>,
    mult: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    #[inline]
    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * self.width() + (j + self.kl - i)
    }

    fn factor(a: &BandMatrix) -> Result<Self> {
        let (n, kl, ku) = (a.n, a.kl, a.ku);
        let mut lu = BandLu {
            n,
            kl,
            ku,
            work: vec![0.0; n * (2 * kl + ku + 1)],
            mult: vec![0.0; n * kl],
            piv: vec![0; n],
        };
        for i in 0..n {
            for j in a.row_cols(i) {
                let k = lu.at(i, j);
                lu.work[k] = a.get(i, j);
            }
        }
        let scale = a.max_abs();
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.work[lu.at(k, k)].abs();
            for i in k + 1..=last {
                let v = lu.work[lu.at(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > scale * 1e-300) || !best.is_finite() {
                return Err(Error::solver(format!(
                    "singular banded system (zero pivot at row {k})"
                )));
            }
            lu.piv[k] = p;
            let cmax = (k + kl + ku).min(n - 1);
            if p != k {
                for c in k..=cmax {
                    let (ik, ip) = (lu.at(k, c), lu.at(p, c));
                    lu.work.swap(ik, ip);
                }
            }
            let pivot = lu.work[lu.at(k, k)];
            for i in k + 1..=last {
                let ik = lu.at(i, k);
                let l = lu.work[ik] / pivot;
                lu.mult[k * kl + (i - k - 1)] = l;
                lu.work[ik] = 0.0;
                if l != 0.0 {
                    for c in k + 1..=cmax {
                        let src = lu.work[lu.at(k, c)];
                        let dst = lu.at(i, c);
                        lu.work[dst] -= l * src;
                    }
                }
            }
        }
        Ok(lu)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                y.swap(k, p);
            }
            let last = (k + self.kl).min(n - 1);
            for i in k + 1..=last {
                y[i] -= self.mult[k * self.kl + (i - k - 1)] * y[k];
            }
        }
        for i in (0..n).rev() {
            let cmax = (i + self.kl + self.ku).min(n - 1);
            let mut s = y[i];
            for c in i + 1..=cmax {
                s -= self.work[self.at(i, c)] * y[c];
            }
            y[i] = s / self.work[self.at(i, i)];
        }
        y
    }
}

/// Positive null vector of a singular M-matrix whose columns sum to zero.
///
/// Grassmann–Taksar–Heyman state reduction on `Q = -Aᵀ`: every pivot is
/// formed as a sum of nonnegative off-diagonal entries, so no cancellation
/// occurs and each component carries a small *relative* error even when
/// the entries span hundreds of orders of magnitude. The result is scaled
/// so that its first component equals one.
pub fn gth_null_vector(a: &BandMatrix) -> Result<Vec<f64>> {
    let n = a.dim();
    if n == 0 {
        return Err(Error::input("empty matrix"));
    }
    let b = a.kl.max(a.ku);
    let w = 2 * b + 1;
    let mut q = vec![0.0; n * w];
    let at = |i: usize, j: usize| i * w + (j + b - i);
    for i in 0..n {
        for j in a.row_cols(i) {
            if i != j {
                let v = -a.get(i, j);
                if v < 0.0 {
                    return Err(Error::solver(format!(
                        "positive off-diagonal entry at ({i}, {j}); operator is not an M-matrix"
                    )));
                }
                // q(j, i) = -a(i, j)
                q[at(j, i)] = v;
            }
        }
    }
    let mut outflow = vec![0.0; n];
    for k in (1..n).rev() {
        let lo = k.saturating_sub(b);
        let s: f64 = (lo..k).map(|j| q[at(k, j)]).sum();
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::solver(format!(
                "state {k} is disconnected from the states below it (reducible operator)"
            )));
        }
        outflow[k] = s;
        for i in lo..k {
            q[at(i, k)] /= s;
        }
        for i in lo..k {
            let qik = q[at(i, k)];
            if qik == 0.0 {
                continue;
            }
            for j in lo..k {
                if j != i {
                    let qkj = q[at(k, j)];
                    q[at(i, j)] += qik * qkj;
                }
            }
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for k in 1..n {
        let lo = k.saturating_sub(b);
        pi[k] = (lo..k).map(|i| pi[i] * q[at(i, k)]).sum();
    }
    Ok(pi)
}
