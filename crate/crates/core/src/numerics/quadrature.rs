//! Adaptive Gauss–Kronrod (7/15) quadrature.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let (k, err) = kronrod(f, a, b);
    if err <= tol || depth == 0 || (b - a) < 1e-14 {
        return k;
    }
    let m = 0.5 * (a + b);
    recurse(f, a, m, 0.5 * tol, depth - 1) + recurse(f, m, b, 0.5 * tol, depth - 1)
}

/// `∫_a^b f` to absolute tolerance `tol` (best effort for nonsmooth `f`:
/// subdivision stops at depth 40).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    recurse(&f, a, b, tol.max(1e-15), 40)
}

/// Composite trapezoid rule on samples with spacing `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn smooth_integrals() {
        let v = integrate(|x| (2.0 * PI * x).cos(), 0.25, 0.75, 1e-12);
        assert!((v + 1.0 / PI).abs() < 1e-12);
        let v = integrate(f64::exp, 0.0, 1.0, 1e-12);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn kinked_integrand() {
        let v = integrate(|x: f64| (x - 0.3).abs(), 0.0, 1.0, 1e-11);
        assert!((v - (0.045 + 0.245)).abs() < 1e-10);
    }

    #[test]
    fn trapezoid_linear_exact() {
        let xs: Vec<f64> = (0..=10).map(|i| 3.0 * i as f64 / 10.0 + 1.0).collect();
        assert!((trapezoid(&xs, 0.1) - 2.5).abs() < 1e-14);
    }
}
