//! Uniform-grid functions and the catalog of test functions.
//!
//! A [`GridFunction`] stores values at `N + 1` equispaced points of `[lo, hi]`.
//! The same type carries functions on `[0, 1]` and their extensions to
//! `[-h, 1 + h]`. Off-grid evaluation is piecewise linear, which is a positive
//! scheme reproducing affine functions exactly.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

/// Default number of grid intervals for stored functions.
pub const DEFAULT_GRID: usize = 1024;

/// Values of a real function at equispaced points of `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridFunction {
    lo: f64,
    hi: f64,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(lo: f64, hi: f64, values: Vec<f64>) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::InvalidGrid(format!(
                "need lo < hi, got [{lo}, {hi}]"
            )));
        }
        if values.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 values, got {}",
                values.len()
            )));
        }
        Ok(Self { lo, hi, values })
    }

    /// Samples `f` at the `n + 1` uniform points of `[lo, hi]`.
    pub fn from_fn(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGrid("need at least one interval".into()));
        }
        let values = uniform_points(lo, hi, n).into_iter().map(f).collect();
        Self::new(lo, hi, values)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Number of intervals `N`.
    pub fn intervals(&self) -> usize {
        self.values.len() - 1
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / self.intervals() as f64
    }

    /// The `i`-th abscissa.
    pub fn x(&self, i: usize) -> f64 {
        grid_point(self.lo, self.hi, self.intervals(), i)
    }

    pub fn xs(&self) -> Vec<f64> {
        uniform_points(self.lo, self.hi, self.intervals())
    }

    /// Returns a function on the same grid with values `f(x_i, v_i)`.
    pub fn map_with_x(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| f(self.x(i), v))
            .collect();
        Self {
            lo: self.lo,
            hi: self.hi,
            values,
        }
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.values.len() == other.values.len() && self.lo == other.lo && self.hi == other.hi
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Piecewise-linear interpolation at `x`.
    pub fn eval_interp(&self, x: f64) -> Result<f64> {
        let tol = 1e-12 * (self.hi - self.lo);
        if !(x >= self.lo - tol && x <= self.hi + tol) {
            return Err(Error::OutOfDomain {
                x,
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok(self.interp_clamped(x))
    }

    /// Interpolation with `x` clamped into `[lo, hi]`.
    pub(crate) fn interp_clamped(&self, x: f64) -> f64 {
        let n = self.intervals();
        let s = ((x - self.lo) / self.spacing()).clamp(0.0, n as f64);
        let i = (s.floor() as usize).min(n - 1);
        let w = s - i as f64;
        if w == 0.0 {
            return self.values[i];
        }
        (1.0 - w) * self.values[i] + w * self.values[i + 1]
    }
}

/// `x_i = lo + i (hi - lo) / n`, with the right endpoint hit exactly.
pub(crate) fn grid_point(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
    if i == n {
        hi
    } else {
        lo + (hi - lo) * (i as f64) / (n as f64)
    }
}

pub(crate) fn uniform_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| grid_point(lo, hi, n, i)).collect()
}

/// Piecewise-linear interpolation of `g` at `x`.
pub fn eval_interp(g: &GridFunction, x: f64) -> Result<f64> {
    g.eval_interp(x)
}

/// `max_i |g1_i - g2_i|` over a shared grid.
pub fn sup_diff(g1: &GridFunction, g2: &GridFunction) -> Result<f64> {
    if !g1.same_grid(g2) {
        return Err(Error::GridMismatch(format!(
            "[{}, {}] with {} points vs [{}, {}] with {} points",
            g1.lo,
            g1.hi,
            g1.values.len(),
            g2.lo,
            g2.hi,
            g2.values.len()
        )));
    }
    Ok(g1
        .values
        .iter()
        .zip(&g2.values)
        .fold(0.0, |acc, (a, b)| acc.max((a - b).abs())))
}

/// The catalog of test functions on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum FunctionSpec {
    /// `e_i(x) = x^i`, `i <= 3`.
    Monomial(u32),
    /// `|x - c|`.
    AbsShift(f64),
    /// `sin(pi x)`.
    SinePi,
    /// `exp(x)`.
    Exponential,
    /// `sqrt(x)`.
    Sqrt,
    /// `max(x - c, 0)`.
    Ramp(f64),
    /// Tabulated values, interpolated piecewise linearly. Must cover `[0, 1]`.
    Samples(GridFunction),
}

impl FunctionSpec {
    pub fn e(i: u32) -> Self {
        FunctionSpec::Monomial(i)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FunctionSpec::Monomial(i) if *i > 3 => Err(Error::InvalidParameter(format!(
                "monomial degree must be in 0..=3, got {i}"
            ))),
            FunctionSpec::AbsShift(c) | FunctionSpec::Ramp(c) if !(0.0..=1.0).contains(c) => Err(
                Error::InvalidParameter(format!("knot parameter must lie in [0, 1], got {c}")),
            ),
            FunctionSpec::Samples(g) if g.lo() > 0.0 || g.hi() < 1.0 => {
                Err(Error::InvalidParameter(format!(
                    "samples must cover [0, 1], got [{}, {}]",
                    g.lo(),
                    g.hi()
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            FunctionSpec::Monomial(i) => x.powi(*i as i32),
            FunctionSpec::AbsShift(c) => (x - c).abs(),
            FunctionSpec::SinePi => (std::f64::consts::PI * x).sin(),
            FunctionSpec::Exponential => x.exp(),
            FunctionSpec::Sqrt => x.max(0.0).sqrt(),
            FunctionSpec::Ramp(c) => (x - c).max(0.0),
            FunctionSpec::Samples(g) => g.interp_clamped(x),
        }
    }

    /// `(||g'||, ||g''||)` for catalog entries in `C^2[0, 1]`.
    pub fn derivative_norms(&self) -> Option<(f64, f64)> {
        use std::f64::consts::{E, PI};
        match self {
            FunctionSpec::Monomial(0) => Some((0.0, 0.0)),
            FunctionSpec::Monomial(1) => Some((1.0, 0.0)),
            FunctionSpec::Monomial(2) => Some((2.0, 2.0)),
            FunctionSpec::Monomial(3) => Some((3.0, 6.0)),
            FunctionSpec::SinePi => Some((PI, PI * PI)),
            FunctionSpec::Exponential => Some((E, E)),
            _ => None,
        }
    }

    /// Points of `[0, 1]` where the function is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            FunctionSpec::AbsShift(c) | FunctionSpec::Ramp(c) => vec![*c],
            FunctionSpec::Samples(g) => g
                .xs()
                .into_iter()
                .filter(|x| (0.0..=1.0).contains(x))
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Exact moduli of smoothness for the monomials.
    ///
    /// `order` is 1 or 2; `delta` is capped at the feasible step range.
    pub fn closed_form_modulus(&self, order: u8, delta: f64) -> Option<f64> {
        let FunctionSpec::Monomial(i) = self else {
            return None;
        };
        let d1 = delta.clamp(0.0, 1.0);
        let d2 = delta.clamp(0.0, 0.5);
        let v = match (order, i) {
            (_, 0) => 0.0,
            (1, 1) => d1,
            (2, 1) => 0.0,
            (1, 2) => 1.0 - (1.0 - d1) * (1.0 - d1),
            (2, 2) => 2.0 * d2 * d2,
            (1, 3) => 1.0 - (1.0 - d1).powi(3),
            (2, 3) => 6.0 * (1.0 - d2) * d2 * d2,
            _ => return None,
        };
        Some(v)
    }
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionSpec::Monomial(i) => write!(f, "e{i}"),
            FunctionSpec::AbsShift(c) => write!(f, "abs_shift:{c}"),
            FunctionSpec::SinePi => write!(f, "sine_pi"),
            FunctionSpec::Exponential => write!(f, "exp"),
            FunctionSpec::Sqrt => write!(f, "sqrt"),
            FunctionSpec::Ramp(c) => write!(f, "ramp:{c}"),
            FunctionSpec::Samples(g) => write!(f, "samples[{}]", g.values().len()),
        }
    }
}

impl FromStr for FunctionSpec {
    type Err = Error;

    /// Parses `e0`..`e3`, `monomial:i`, `abs_shift:c`, `sine_pi`, `exp`, `sqrt`, `ramp:c`.
    fn from_str(s: &str) -> Result<Self> {
        let parse_err = |position: usize, reason: &str| Error::Parse {
            input: s.to_string(),
            position,
            reason: reason.to_string(),
        };
        let mut parts = s.split(':');
        let head = parts.next().unwrap_or_default().trim();
        let arg = parts.next();
        if parts.next().is_some() {
            return Err(parse_err(s.rfind(':').unwrap_or(0), "too many fields"));
        }
        let param = |name: &str| -> Result<f64> {
            let raw =
                arg.ok_or_else(|| parse_err(s.len(), &format!("`{name}` needs a parameter")))?;
            raw.trim()
                .parse::<f64>()
                .map_err(|_| parse_err(head.len() + 1, &format!("`{raw}` is not a number")))
        };
        let spec = match head {
            "e0" | "e1" | "e2" | "e3" if arg.is_none() => {
                FunctionSpec::Monomial(head[1..].parse().expect("digit"))
            }
            "monomial" => {
                let raw = arg.ok_or_else(|| parse_err(s.len(), "`monomial` needs a degree"))?;
                let i = raw
                    .trim()
                    .parse::<u32>()
                    .map_err(|_| parse_err(head.len() + 1, "degree must be an integer"))?;
                FunctionSpec::Monomial(i)
            }
            "abs_shift" => FunctionSpec::AbsShift(param("abs_shift")?),
            "ramp" => FunctionSpec::Ramp(param("ramp")?),
            "sine_pi" | "sin" if arg.is_none() => FunctionSpec::SinePi,
            "exp" | "exponential" if arg.is_none() => FunctionSpec::Exponential,
            "sqrt" | "sqrt_fn" if arg.is_none() => FunctionSpec::Sqrt,
            _ => return Err(parse_err(0, "unknown function")),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Samples `spec` at the `n + 1` uniform points of `[0, 1]`.
pub fn sample(spec: &FunctionSpec, n: usize) -> Result<GridFunction> {
    sample_on(spec, 0.0, 1.0, n)
}

pub fn sample_on(spec: &FunctionSpec, lo: f64, hi: f64, n: usize) -> Result<GridFunction> {
    spec.validate()?;
    GridFunction::from_fn(lo, hi, n, |x| spec.eval(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn samples_monomials() {
        assert_eq!(sample(&FunctionSpec::e(0), 4).unwrap().values(), &[1.0; 5]);
        assert_eq!(
            sample(&FunctionSpec::e(1), 4).unwrap().values(),
            &[0.0, 0.25, 0.5, 0.75, 1.0]
        );
        assert_eq!(
            sample(&FunctionSpec::AbsShift(0.5), 4).unwrap().values(),
            &[0.5, 0.25, 0.0, 0.25, 0.5]
        );
    }

    #[test]
    fn rejects_bad_catalog_entries() {
        assert!(sample(&FunctionSpec::Monomial(4), 4).is_err());
        assert!(sample(&FunctionSpec::AbsShift(1.5), 4).is_err());
        assert!(sample(&FunctionSpec::Ramp(-0.1), 4).is_err());
        assert!(sample(&FunctionSpec::e(1), 0).is_err());
        assert!("cosine".parse::<FunctionSpec>().is_err());
        assert!("abs_shift".parse::<FunctionSpec>().is_err());
        assert!("abs_shift:x".parse::<FunctionSpec>().is_err());
    }

    #[test]
    fn parses_catalog_names() {
        assert_eq!("e2".parse::<FunctionSpec>().unwrap(), FunctionSpec::e(2));
        assert_eq!(
            "monomial:3".parse::<FunctionSpec>().unwrap(),
            FunctionSpec::e(3)
        );
        assert_eq!(
            "abs_shift:0.5".parse::<FunctionSpec>().unwrap(),
            FunctionSpec::AbsShift(0.5)
        );
        assert_eq!("sqrt".parse::<FunctionSpec>().unwrap(), FunctionSpec::Sqrt);
        for spec in [
            "e0",
            "e3",
            "abs_shift:0.25",
            "sine_pi",
            "exp",
            "sqrt",
            "ramp:0.3",
        ] {
            let f: FunctionSpec = spec.parse().unwrap();
            assert_eq!(f.to_string().parse::<FunctionSpec>().unwrap(), f);
        }
    }

    #[test]
    fn interpolation_examples() {
        let e1 = sample(&FunctionSpec::e(1), 4).unwrap();
        assert!((e1.eval_interp(0.3).unwrap() - 0.3).abs() < 1e-15);
        let e0 = sample(&FunctionSpec::e(0), 10).unwrap();
        assert_eq!(e0.eval_interp(0.123).unwrap(), 1.0);
        let e2 = sample(&FunctionSpec::e(2), 2).unwrap();
        assert!((e2.eval_interp(0.25).unwrap() - 0.125).abs() < 1e-15);
        assert!(e2.eval_interp(1.01).is_err());
        assert!(e2.eval_interp(-0.5).is_err());
    }

    #[test]
    fn sup_diff_examples() {
        let e0 = sample(&FunctionSpec::e(0), 4).unwrap();
        let e1 = sample(&FunctionSpec::e(1), 4).unwrap();
        let e2 = sample(&FunctionSpec::e(2), 4).unwrap();
        assert_eq!(sup_diff(&e1, &e1).unwrap(), 0.0);
        assert_eq!(sup_diff(&e1, &e0).unwrap(), 1.0);
        assert_eq!(sup_diff(&e2, &e1).unwrap(), 0.25);
        let coarse = sample(&FunctionSpec::e(1), 2).unwrap();
        assert!(matches!(
            sup_diff(&e1, &coarse),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn quadratic_midpoint_interpolation_error() {
        let n = 16;
        let g = sample(&FunctionSpec::e(2), n).unwrap();
        let h = g.spacing();
        for i in 0..n {
            let mid = g.x(i) + h / 2.0;
            let err = g.eval_interp(mid).unwrap() - mid * mid;
            assert!((err - h * h / 4.0).abs() < 1e-15, "{err}");
        }
    }

    #[test]
    fn extended_interval_grid() {
        let g = GridFunction::from_fn(-0.1, 1.1, 12, |x| x).unwrap();
        assert!((g.spacing() - 0.1).abs() < 1e-15);
        assert!((g.eval_interp(-0.05).unwrap() + 0.05).abs() < 1e-15);
        assert!(GridFunction::new(1.0, 0.0, vec![0.0, 1.0]).is_err());
        assert!(GridFunction::new(0.0, 1.0, vec![0.0]).is_err());
    }

    #[test]
    fn closed_form_moduli_match_brute_force() {
        let n = 400;
        for i in 0..=3u32 {
            let f = FunctionSpec::e(i);
            for &delta in &[0.05, 0.25, 0.5, 0.9] {
                let j = (delta * n as f64).round() as usize;
                let mut w1: f64 = 0.0;
                let mut w2: f64 = 0.0;
                for s in 0..=j {
                    let h = s as f64 / n as f64;
                    for k in 0..=n {
                        let x = k as f64 / n as f64;
                        if x + h <= 1.0 {
                            w1 = w1.max((f.eval(x + h) - f.eval(x)).abs());
                        }
                        if x + h <= 1.0 && x - h >= 0.0 {
                            w2 = w2.max((f.eval(x + h) - 2.0 * f.eval(x) + f.eval(x - h)).abs());
                        }
                    }
                }
                assert!((f.closed_form_modulus(1, delta).unwrap() - w1).abs() < 1e-12);
                assert!((f.closed_form_modulus(2, delta).unwrap() - w2).abs() < 1e-12);
            }
        }
        assert!(FunctionSpec::SinePi.closed_form_modulus(1, 0.1).is_none());
    }

    proptest! {
        #[test]
        fn interp_reproduces_affine(a in -5.0..5.0f64, b in -5.0..5.0f64, n in 1usize..64, x in 0.0..1.0f64) {
            let g = GridFunction::from_fn(0.0, 1.0, n, |t| a * t + b).unwrap();
            let v = g.eval_interp(x).unwrap();
            prop_assert!((v - (a * x + b)).abs() <= 1e-12 * (1.0 + a.abs() + b.abs()));
        }

        #[test]
        fn sup_diff_is_a_metric(
            u in proptest::collection::vec(-10.0..10.0f64, 9),
            v in proptest::collection::vec(-10.0..10.0f64, 9),
            w in proptest::collection::vec(-10.0..10.0f64, 9),
        ) {
            let gu = GridFunction::new(0.0, 1.0, u.clone()).unwrap();
            let gv = GridFunction::new(0.0, 1.0, v).unwrap();
            let gw = GridFunction::new(0.0, 1.0, w).unwrap();
            let uv = sup_diff(&gu, &gv).unwrap();
            prop_assert_eq!(uv, sup_diff(&gv, &gu).unwrap());
            prop_assert!(uv <= sup_diff(&gu, &gw).unwrap() + sup_diff(&gw, &gv).unwrap() + 1e-12);
            prop_assert_eq!(sup_diff(&gu, &gu.clone()).unwrap(), 0.0);
            prop_assert_eq!(uv == 0.0, gu.values() == gv.values());
        }
    }
}
