//! Sign regions of the potential slopes: `J` where every `ψ′_i > 0`, `K` where
//! every `ψ′_i < 0`, and the neutral remainder.

use serde::Serialize;

use super::potential::PotentialSet;

/// Default sign threshold.
pub const DETECTION_TOLERANCE: f64 = 1e-9;

/// Endpoint accuracy of the bisection.
const ENDPOINT_TOL: f64 = 1e-10;

/// Neutral gaps narrower than this are reported as isolated points.
const POINT_WIDTH: f64 = 1e-8;

/// Closed interval `[lo, hi]`; `lo == hi` denotes an isolated point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Which part of the decomposition a point belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// Inside `J_k` (zero-based `k`).
    J(usize),
    /// Inside `K_l`.
    K(usize),
    /// In a neutral interval of positive width.
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionDecomposition {
    pub j_intervals: Vec<Interval>,
    pub k_intervals: Vec<Interval>,
    /// Complement of `∪J ∪ ∪K`; gaps narrower than `1e-8` collapse to points.
    pub neutral_set: Vec<Interval>,
    pub detection_tolerance: f64,
}

impl RegionDecomposition {
    /// Region of `x`. Points in collapsed neutral gaps take the region of the
    /// interval to their right (or to their left at the right end).
    pub fn region_at(&self, x: f64) -> Region {
        if let Some(k) = self.j_intervals.iter().position(|iv| iv.contains(x)) {
            return Region::J(k);
        }
        if let Some(l) = self.k_intervals.iter().position(|iv| iv.contains(x)) {
            return Region::K(l);
        }
        let gap = self
            .neutral_set
            .iter()
            .find(|iv| iv.lo - POINT_WIDTH <= x && x <= iv.hi + POINT_WIDTH);
        match gap {
            Some(iv) if iv.len() >= POINT_WIDTH => Region::Neutral,
            _ => {
                let right = self.nearest(x, true);
                right
                    .or_else(|| self.nearest(x, false))
                    .unwrap_or(Region::Neutral)
            }
        }
    }

    fn nearest(&self, x: f64, rightwards: bool) -> Option<Region> {
        let dist = |iv: &Interval| {
            if rightwards {
                iv.lo - x
            } else {
                x - iv.hi
            }
        };
        let j = self
            .j_intervals
            .iter()
            .enumerate()
            .filter(|(_, iv)| dist(iv) >= 0.0)
            .map(|(k, iv)| (dist(iv), Region::J(k)));
        let k = self
            .k_intervals
            .iter()
            .enumerate()
            .filter(|(_, iv)| dist(iv) >= 0.0)
            .map(|(l, iv)| (dist(iv), Region::K(l)));
        j.chain(k)
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .filter(|(d, _)| *d <= 2.0 * POINT_WIDTH)
            .map(|(_, r)| r)
    }

    pub fn in_j(&self, x: f64) -> bool {
        matches!(self.region_at(x), Region::J(_))
    }

    /// Total length of `∪J`.
    pub fn j_measure(&self) -> f64 {
        self.j_intervals.iter().map(Interval::len).sum()
    }

    pub fn k_measure(&self) -> f64 {
        self.k_intervals.iter().map(Interval::len).sum()
    }

    pub fn neutral_points(&self) -> Vec<f64> {
        self.neutral_set
            .iter()
            .filter(|iv| iv.is_point())
            .map(|iv| iv.lo)
            .collect()
    }
}

/// Maximal intervals of `[0, 1]` on which `pred` holds, found from `samples + 1`
/// equispaced samples and refined by bisection to `1e-10`. Returned endpoints
/// are inner: `pred` holds at both.
pub fn sign_intervals(pred: impl Fn(f64) -> bool, samples: usize) -> Vec<Interval> {
    let samples = samples.max(2);
    let xs: Vec<f64> = (0..=samples).map(|k| k as f64 / samples as f64).collect();
    let flags: Vec<bool> = xs.iter().map(|&x| pred(x)).collect();
    // bisect between a point where pred == `inside` and one where it is not;
    // return the last point still satisfying pred == true
    let edge = |mut good: f64, mut bad: f64| {
        while (bad - good).abs() > ENDPOINT_TOL {
            let mid = 0.5 * (good + bad);
            if pred(mid) {
                good = mid;
            } else {
                bad = mid;
            }
        }
        good
    };
    let mut out = Vec::new();
    let mut k = 0;
    while k <= samples {
        if !flags[k] {
            k += 1;
            continue;
        }
        let start = k;
        while k < samples && flags[k + 1] {
            k += 1;
        }
        let lo = if start == 0 {
            0.0
        } else {
            edge(xs[start], xs[start - 1])
        };
        let hi = if k == samples {
            1.0
        } else {
            edge(xs[k], xs[k + 1])
        };
        out.push(Interval::new(lo, hi));
        k += 1;
    }
    out
}

/// Complement of a sorted list of disjoint intervals in `[0, 1]`.
fn complement(parts: &[Interval]) -> Vec<Interval> {
    let mut out = Vec::new();
    let mut cursor = 0.0;
    for iv in parts {
        if iv.lo > cursor {
            out.push(gap(cursor, iv.lo));
        }
        cursor = iv.hi;
    }
    if parts.is_empty() {
        out.push(Interval::new(0.0, 1.0));
    } else if cursor < 1.0 {
        out.push(gap(cursor, 1.0));
    }
    out
}

fn gap(lo: f64, hi: f64) -> Interval {
    if hi - lo < POINT_WIDTH {
        let mid = 0.5 * (lo + hi);
        Interval::new(mid, mid)
    } else {
        Interval::new(lo, hi)
    }
}

/// Decomposes `[0, 1]` with the default detection tolerance.
pub fn decompose_regions(pot: &PotentialSet, samples: usize) -> RegionDecomposition {
    decompose_regions_with(pot, samples, DETECTION_TOLERANCE)
}

pub fn decompose_regions_with(pot: &PotentialSet, samples: usize, tol: f64) -> RegionDecomposition {
    let j_intervals = sign_intervals(|x| pot.min_slope(x).0 > tol, samples);
    let k_intervals = sign_intervals(|x| pot.max_slope(x).0 < -tol, samples);
    let mut all: Vec<Interval> = j_intervals.iter().chain(&k_intervals).copied().collect();
    all.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    RegionDecomposition {
        neutral_set: complement(&all),
        j_intervals,
        k_intervals,
        detection_tolerance: tol,
    }
}

/// The intervals on which species `i` has `ψ′_i < −tol`.
pub fn species_negative_sets(pot: &PotentialSet, i: usize, samples: usize) -> Vec<Interval> {
    let p = pot.get(i);
    sign_intervals(|x| p.slope(x) < -DETECTION_TOLERANCE, samples)
}
