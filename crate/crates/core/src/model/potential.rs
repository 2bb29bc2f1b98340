//! Conformation potentials `ψ_i` on `[0, 1]`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_frequency() -> f64 {
    1.0
}

fn default_smoothing() -> f64 {
    0.01
}

/// Declarative description of one potential, as it appears in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// `ψ(x) = offset + slope·x`.
    Linear {
        slope: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `ψ′(x) = amplitude·cos(2π·frequency·x + phase)`, with `ψ` its sine primitive.
    Cosine {
        amplitude: f64,
        #[serde(default = "default_frequency")]
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `ψ′ = cos(2π·frequency·x)` with positive lobes scaled by `positive_scale`
    /// and negative lobes by `negative_scale`. Only `C^{1,1}`: `ψ″` jumps where
    /// the cosine changes sign.
    LobedCosine {
        positive_scale: f64,
        negative_scale: f64,
        #[serde(default = "default_frequency")]
        frequency: f64,
    },
    /// Periodic asymmetric sawtooth rising by `amplitude` over `rise_fraction`
    /// of each period and falling over the rest, with every corner replaced by
    /// a cubic slope blend of width `smoothing`. `phase` is the fraction of a
    /// period the tooth is advanced by at `x = 0`.
    Sawtooth {
        period: f64,
        amplitude: f64,
        rise_fraction: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default = "default_smoothing")]
        smoothing: f64,
    },
    /// `ψ(x) = base(x + shift)`; the base must be a closed-form preset.
    Shifted {
        base: Box<PotentialSpec>,
        shift: f64,
    },
    /// Natural cubic spline through `(xs[k], values[k])`, `xs` spanning `[0, 1]`.
    Samples { xs: Vec<f64>, values: Vec<f64> },
}

/// A compiled, evaluatable potential.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    spec: PotentialSpec,
    shape: Shape,
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Linear {
        slope: f64,
        offset: f64,
    },
    Cosine {
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
    LobedCosine {
        pos: f64,
        neg: f64,
        omega: f64,
    },
    Sawtooth(Sawtooth),
    Shifted {
        base: Box<Shape>,
        shift: f64,
    },
    Spline(Spline),
}

impl Potential {
    pub fn new(spec: PotentialSpec) -> Result<Self> {
        let shape = Shape::compile(&spec)?;
        Ok(Self { spec, shape })
    }

    pub fn spec(&self) -> &PotentialSpec {
        &self.spec
    }

    /// Whether `ψ ∈ C^{2,1}` holds by construction.
    pub fn is_c21(&self) -> bool {
        self.shape.is_c21()
    }

    pub fn value(&self, x: f64) -> f64 {
        self.shape.eval(x).0
    }

    pub fn slope(&self, x: f64) -> f64 {
        self.shape.eval(x).1
    }

    pub fn curvature(&self, x: f64) -> f64 {
        self.shape.eval(x).2
    }

    /// `(ψ, ψ′, ψ″)` at `x`.
    pub fn eval_all(&self, x: f64) -> (f64, f64, f64) {
        self.shape.eval(x)
    }
}

impl Shape {
    fn compile(spec: &PotentialSpec) -> Result<Self> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::input(format!(
                    "potential parameter `{name}` is not finite"
                )))
            }
        };
        Ok(match spec {
            PotentialSpec::Linear { slope, offset } => Shape::Linear {
                slope: finite("slope", *slope)?,
                offset: finite("offset", *offset)?,
            },
            PotentialSpec::Cosine {
                amplitude,
                frequency,
                phase,
            } => {
                if !(*frequency > 0.0) {
                    return Err(Error::input("cosine frequency must be positive"));
                }
                Shape::Cosine {
                    amplitude: finite("amplitude", *amplitude)?,
                    omega: 2.0 * PI * frequency,
                    phase: finite("phase", *phase)?,
                }
            }
            PotentialSpec::LobedCosine {
                positive_scale,
                negative_scale,
                frequency,
            } => {
                if !(*frequency > 0.0) {
                    return Err(Error::input("cosine frequency must be positive"));
                }
                Shape::LobedCosine {
                    pos: finite("positive_scale", *positive_scale)?,
                    neg: finite("negative_scale", *negative_scale)?,
                    omega: 2.0 * PI * frequency,
                }
            }
            PotentialSpec::Sawtooth {
                period,
                amplitude,
                rise_fraction,
                phase,
                smoothing,
            } => Shape::Sawtooth(Sawtooth::new(
                *period,
                *amplitude,
                *rise_fraction,
                *phase,
                *smoothing,
            )?),
            PotentialSpec::Shifted { base, shift } => {
                let base = Shape::compile(base)?;
                if matches!(base, Shape::Spline(_)) {
                    return Err(Error::input(
                        "sampled potentials are only defined on [0, 1] and cannot be shifted",
                    ));
                }
                Shape::Shifted {
                    base: Box::new(base),
                    shift: finite("shift", *shift)?,
                }
            }
            PotentialSpec::Samples { xs, values } => Shape::Spline(Spline::new(xs, values)?),
        })
    }

    fn is_c21(&self) -> bool {
        match self {
            Shape::LobedCosine { pos, neg, .. } => pos == neg,
            Shape::Shifted { base, .. } => base.is_c21(),
            _ => true,
        }
    }

    fn eval(&self, x: f64) -> (f64, f64, f64) {
        match self {
            Shape::Linear { slope, offset } => (offset + slope * x, *slope, 0.0),
            Shape::Cosine {
                amplitude,
                omega,
                phase,
            } => {
                let (s, c) = (omega * x + phase).sin_cos();
                (amplitude * s / omega, amplitude * c, -amplitude * omega * s)
            }
            Shape::LobedCosine { pos, neg, omega } => lobed_cosine(*pos, *neg, *omega, x),
            Shape::Sawtooth(saw) => saw.eval(x),
            Shape::Shifted { base, shift } => base.eval(x + shift),
            Shape::Spline(spline) => spline.eval(x),
        }
    }
}

fn lobed_cosine(pos: f64, neg: f64, omega: f64, x: f64) -> (f64, f64, f64) {
    let u = omega * x;
    let turns = (u / (2.0 * PI)).floor();
    let v = u - 2.0 * PI * turns;
    let (s, c) = v.sin_cos();
    let per_turn = 2.0 * pos - 2.0 * neg;
    let g = if v <= 0.5 * PI {
        pos * s
    } else if v <= 1.5 * PI {
        pos + neg * (s - 1.0)
    } else {
        pos - 2.0 * neg + pos * (s + 1.0)
    };
    let scale = if c >= 0.0 { pos } else { neg };
    (
        (turns * per_turn + g) / omega,
        scale * c,
        -scale * omega * s,
    )
}

/// Sawtooth with cubic-blended corners. The slope blend uses the smoothstep
/// `3t² − 2t³`, so `ψ″` is continuous and piecewise quadratic.
#[derive(Debug, Clone, PartialEq)]
struct Sawtooth {
    period: f64,
    amplitude: f64,
    rise: f64,
    phase: f64,
    width: f64,
    slope_up: f64,
    slope_down: f64,
}

impl Sawtooth {
    fn new(period: f64, amplitude: f64, rise: f64, phase: f64, width: f64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::input("sawtooth period must be positive"));
        }
        if !(rise > 0.0 && rise < 1.0) {
            return Err(Error::input("sawtooth rise_fraction must lie in (0, 1)"));
        }
        if !amplitude.is_finite() || !phase.is_finite() {
            return Err(Error::input("sawtooth amplitude and phase must be finite"));
        }
        if !(width > 0.0) {
            return Err(Error::input(
                "sawtooth smoothing must be positive: unsmoothed corners are not C^{2,1}",
            ));
        }
        let half = width / (2.0 * period);
        if half >= 0.5 * rise.min(1.0 - rise) {
            return Err(Error::input(
                "sawtooth smoothing is too wide for the rising or falling segment",
            ));
        }
        Ok(Self {
            period,
            amplitude,
            rise,
            phase,
            width,
            slope_up: amplitude / (rise * period),
            slope_down: -amplitude / ((1.0 - rise) * period),
        })
    }

    fn raw(&self, f: f64) -> f64 {
        if f <= self.rise {
            self.amplitude * f / self.rise
        } else {
            self.amplitude * (1.0 - f) / (1.0 - self.rise)
        }
    }

    fn eval(&self, x: f64) -> (f64, f64, f64) {
        let xi = x / self.period + self.phase;
        let f = xi - xi.floor();
        let half = self.width / (2.0 * self.period);
        // (corner position in period units, slope before, slope after, value where the blend starts)
        let corner = if f < half {
            Some((0.0, self.slope_down, self.slope_up, self.raw(1.0 - half)))
        } else if f > 1.0 - half {
            Some((1.0, self.slope_down, self.slope_up, self.raw(1.0 - half)))
        } else if (f - self.rise).abs() < half {
            Some((
                self.rise,
                self.slope_up,
                self.slope_down,
                self.raw(self.rise - half),
            ))
        } else {
            None
        };
        match corner {
            None => {
                let slope = if f <= self.rise {
                    self.slope_up
                } else {
                    self.slope_down
                };
                (self.raw(f), slope, 0.0)
            }
            Some((c, left, right, start)) => {
                let t = (f - c) / (2.0 * half) + 0.5;
                let jump = right - left;
                let w = self.width;
                let value = start + left * t * w + jump * w * (t * t * t - 0.5 * t * t * t * t);
                let slope = left + jump * t * t * (3.0 - 2.0 * t);
                let curvature = jump * 6.0 * t * (1.0 - t) / w;
                (value, slope, curvature)
            }
        }
    }
}

/// Natural cubic spline.
#[derive(Debug, Clone, PartialEq)]
struct Spline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    m: Vec<f64>,
}

impl Spline {
    fn new(xs: &[f64], ys: &[f64]) -> Result<Self> {
        let n = xs.len();
        if n < 3 || ys.len() != n {
            return Err(Error::input(
                "sampled potential needs at least 3 points and matching xs/values lengths",
            ));
        }
        if xs[0] != 0.0 || xs[n - 1] != 1.0 {
            return Err(Error::input(
                "sampled potential xs must start at 0 and end at 1",
            ));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) || ys.iter().any(|y| !y.is_finite()) {
            return Err(Error::input(
                "sampled potential xs must be strictly increasing and values finite",
            ));
        }
        // Tridiagonal system for interior second derivatives (natural ends).
        let mut m = vec![0.0; n];
        let k = n - 2;
        let mut diag = vec![0.0; k];
        let mut upper = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        for r in 0..k {
            let i = r + 1;
            let h0 = xs[i] - xs[i - 1];
            let h1 = xs[i + 1] - xs[i];
            diag[r] = (h0 + h1) / 3.0;
            upper[r] = h1 / 6.0;
            rhs[r] = (ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0;
        }
        for r in 1..k {
            let h0 = xs[r + 1] - xs[r];
            let l = (h0 / 6.0) / diag[r - 1];
            diag[r] -= l * upper[r - 1];
            rhs[r] -= l * rhs[r - 1];
        }
        for r in (0..k).rev() {
            let next = if r + 1 < k { m[r + 2] } else { 0.0 };
            m[r + 1] = (rhs[r] - upper[r] * next) / diag[r];
        }
        Ok(Self {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            m,
        })
    }

    fn eval(&self, x: f64) -> (f64, f64, f64) {
        let n = self.xs.len();
        let k = match self.xs.partition_point(|&v| v <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let (x0, x1) = (self.xs[k], self.xs[k + 1]);
        let h = x1 - x0;
        let (a, b) = (x1 - x, x - x0);
        let (m0, m1) = (self.m[k], self.m[k + 1]);
        let c0 = self.ys[k] / h - m0 * h / 6.0;
        let c1 = self.ys[k + 1] / h - m1 * h / 6.0;
        let value = m0 * a * a * a / (6.0 * h) + m1 * b * b * b / (6.0 * h) + c0 * a + c1 * b;
        let slope = -m0 * a * a / (2.0 * h) + m1 * b * b / (2.0 * h) - c0 + c1;
        let curvature = (m0 * a + m1 * b) / h;
        (value, slope, curvature)
    }
}

/// Derivative order accepted by [`PotentialSet::eval`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivative {
    Value,
    First,
    Second,
}

impl TryFrom<u8> for Derivative {
    type Error = Error;

    fn try_from(order: u8) -> Result<Self> {
        match order {
            0 => Ok(Derivative::Value),
            1 => Ok(Derivative::First),
            2 => Ok(Derivative::Second),
            _ => Err(Error::input(format!(
                "derivative order {order} not in 0..=2"
            ))),
        }
    }
}

/// The potentials of all `I` conformations.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSet {
    potentials: Vec<Potential>,
}

impl PotentialSet {
    pub fn new(potentials: Vec<Potential>) -> Result<Self> {
        if potentials.is_empty() {
            return Err(Error::input("at least one potential is required"));
        }
        Ok(Self { potentials })
    }

    pub fn from_specs(specs: impl IntoIterator<Item = PotentialSpec>) -> Result<Self> {
        Self::new(
            specs
                .into_iter()
                .map(Potential::new)
                .collect::<Result<Vec<_>>>()?,
        )
    }

    pub fn species_count(&self) -> usize {
        self.potentials.len()
    }

    pub fn potentials(&self) -> &[Potential] {
        &self.potentials
    }

    pub fn get(&self, i: usize) -> &Potential {
        &self.potentials[i]
    }

    /// `ψ_i`, `ψ′_i` or `ψ″_i` at `x`, with range checks.
    pub fn eval(&self, i: usize, x: f64, order: Derivative) -> Result<f64> {
        if i >= self.potentials.len() {
            return Err(Error::input(format!(
                "species index {i} out of range (I = {})",
                self.potentials.len()
            )));
        }
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::input(format!("x = {x} outside [0, 1]")));
        }
        let p = &self.potentials[i];
        Ok(match order {
            Derivative::Value => p.value(x),
            Derivative::First => p.slope(x),
            Derivative::Second => p.curvature(x),
        })
    }

    /// `min_i ψ′_i(x)` and the lowest index attaining it.
    pub fn min_slope(&self, x: f64) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for (i, p) in self.potentials.iter().enumerate() {
            let s = p.slope(x);
            if s < best.0 {
                best = (s, i);
            }
        }
        best
    }

    /// `max_i ψ′_i(x)` and the lowest index attaining it.
    pub fn max_slope(&self, x: f64) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, p) in self.potentials.iter().enumerate() {
            let s = p.slope(x);
            if s > best.0 {
                best = (s, i);
            }
        }
        best
    }

    pub fn all_c21(&self) -> bool {
        self.potentials.iter().all(Potential::is_c21)
    }

    /// Sampled Lipschitz constant of the slopes, `max_{i,x} |ψ″_i(x)|`.
    pub fn slope_lipschitz(&self) -> f64 {
        const SAMPLES: usize = 8192;
        let mut lip: f64 = 0.0;
        for p in &self.potentials {
            for k in 0..=SAMPLES {
                lip = lip.max(p.curvature(k as f64 / SAMPLES as f64).abs());
            }
        }
        lip
    }

    /// Sampled `max_x |ψ′_i(x)|`.
    pub fn max_abs_slope(&self, i: usize) -> f64 {
        const SAMPLES: usize = 8192;
        (0..=SAMPLES)
            .map(|k| self.potentials[i].slope(k as f64 / SAMPLES as f64).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn saw() -> Potential {
        Potential::new(PotentialSpec::Sawtooth {
            period: 1.0 / 3.0,
            amplitude: 1.0,
            rise_fraction: 0.8,
            phase: 0.0,
            smoothing: 0.01,
        })
        .unwrap()
    }

    #[test]
    fn linear_slope() {
        let set = PotentialSet::from_specs([PotentialSpec::Linear {
            slope: 1.0,
            offset: 0.0,
        }])
        .unwrap();
        assert_eq!(set.eval(0, 0.3, Derivative::First).unwrap(), 1.0);
    }

    #[test]
    fn cosine_slope_at_half() {
        let set = PotentialSet::from_specs([PotentialSpec::Cosine {
            amplitude: 1.0,
            frequency: 1.0,
            phase: 0.0,
        }])
        .unwrap();
        let v = set.eval(0, 0.5, Derivative::First).unwrap();
        assert!((v + 1.0).abs() < 1e-15);
    }

    #[test]
    fn sawtooth_corner_midpoint_by_hand() {
        // slopes 3.75 and -15 with width 0.01; at the trough midpoint the blend
        // gives ψ = 3w(s_up - s_down)/32, ψ′ = (s_up + s_down)/2,
        // ψ″ = (s_up - s_down)·(6·½·½)/w.
        let p = saw();
        let (v, s, c) = p.eval_all(0.0);
        assert!((v - 0.017_578_125).abs() < 1e-15, "{v}");
        assert!((s + 5.625).abs() < 1e-13, "{s}");
        assert!((c - 2812.5).abs() < 1e-9, "{c}");
        // away from corners the raw sawtooth is untouched
        let (v, s, c) = p.eval_all(0.1);
        assert!((v - 0.1 * 3.75).abs() < 1e-14);
        assert_eq!((s, c), (3.75, 0.0));
    }

    #[test]
    fn raw_sawtooth_rejected() {
        let err = Potential::new(PotentialSpec::Sawtooth {
            period: 0.5,
            amplitude: 1.0,
            rise_fraction: 0.8,
            phase: 0.0,
            smoothing: 0.0,
        });
        assert!(matches!(err, Err(Error::Input(_))));
    }

    #[test]
    fn out_of_range_rejected() {
        let set = PotentialSet::new(vec![saw()]).unwrap();
        assert!(set.eval(0, 1.2, Derivative::Value).is_err());
        assert!(set.eval(1, 0.2, Derivative::Value).is_err());
        assert!(Derivative::try_from(3).is_err());
    }

    #[test]
    fn spline_reproduces_cubic_free_data() {
        // a natural spline reproduces straight lines exactly
        let xs: Vec<f64> = (0..=8).map(|k| k as f64 / 8.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let p = Potential::new(PotentialSpec::Samples { xs, values: ys }).unwrap();
        for &x in &[0.0, 0.13, 0.5, 0.77, 1.0] {
            let (v, s, c) = p.eval_all(x);
            assert!((v - (2.0 - 0.5 * x)).abs() < 1e-14);
            assert!((s + 0.5).abs() < 1e-13);
            assert!(c.abs() < 1e-12);
        }
    }

    #[test]
    fn lobed_cosine_primitive() {
        let p = Potential::new(PotentialSpec::LobedCosine {
            positive_scale: 1.0,
            negative_scale: 0.25,
            frequency: 1.0,
        })
        .unwrap();
        assert!(!p.is_c21());
        let num = crate::numerics::integrate(|x| p.slope(x), 0.0, 0.9, 1e-12);
        assert!((p.value(0.9) - p.value(0.0) - num).abs() < 1e-10);
    }

    #[test]
    fn min_slope_ties_lowest_index() {
        let set = PotentialSet::from_specs([
            PotentialSpec::Linear {
                slope: 1.0,
                offset: 0.0,
            },
            PotentialSpec::Linear {
                slope: 1.0,
                offset: 3.0,
            },
        ])
        .unwrap();
        assert_eq!(set.min_slope(0.4), (1.0, 0));
        assert_eq!(set.max_slope(0.4), (1.0, 0));
    }
}
