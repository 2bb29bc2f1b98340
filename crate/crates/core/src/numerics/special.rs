//! Scalar helpers shared by the density and phase discretizations.

/// Largest exponent evaluated exactly by [`exp_capped`]; beyond it the
/// exponential is continued linearly.
pub const EXP_CAP: f64 = 700.0;

/// Bernoulli function `B(x) = x / (e^x - 1)`, with `B(0) = 1`.
///
/// Stable for all finite `x`: large positive arguments decay like `x e^{-x}`,
/// large negative ones grow like `-x`.
pub fn bernoulli(x: f64) -> f64 {
    if x.abs() < 1e-10 {
        1.0 - 0.5 * x
    } else if x > 0.0 {
        x * (-x).exp() / -(-x).exp_m1()
    } else {
        x / x.exp_m1()
    }
}

/// `ln B(x)`, finite even where `B(x)` itself underflows.
pub fn ln_bernoulli(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        -0.5 * x - x * x / 24.0
    } else if x > 0.0 {
        x.ln() - x - (-(-x).exp_m1()).ln()
    } else {
        (-x).ln() - (-x.exp_m1()).ln()
    }
}

/// `e^z` for `z <= EXP_CAP`, linear continuation `e^CAP (1 + z - CAP)` above.
///
/// Returns `(value, derivative, capped)`.
#[inline]
pub fn exp_capped(z: f64) -> (f64, f64, bool) {
    if z > EXP_CAP {
        let e = EXP_CAP.exp();
        (e * (1.0 + z - EXP_CAP), e, true)
    } else {
        let e = z.exp();
        (e, e, false)
    }
}

/// `ln(sum_k w_k e^{a_k})` for nonnegative weights, without overflow.
pub fn log_sum_exp_weighted(terms: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let terms: Vec<(f64, f64)> = terms.into_iter().filter(|&(w, _)| w > 0.0).collect();
    let peak = terms
        .iter()
        .map(|&(_, a)| a)
        .fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return peak;
    }
    let sum: f64 = terms.iter().map(|&(w, a)| w * (a - peak).exp()).sum();
    peak + sum.ln()
}
