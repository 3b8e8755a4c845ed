//! Moduli of smoothness, best linear approximation, linear extension and
//! the hat-kernel smoothing `Z_h f`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gridfn::{sample, uniform_points, FunctionSpec, GridFunction, DEFAULT_GRID};
use crate::operators::make_bernstein;

/// Grid resolution used for moduli of smoothness.
pub const DEFAULT_OMEGA_GRID: usize = 4096;
pub const MIN_OMEGA_GRID: usize = 64;

/// Simpson panels per half-support of the hat kernel.
pub const SIMPSON_PANELS: usize = 64;

/// Points of the discrete subgrid used for minimax lines.
const MINIMAX_POINTS: usize = 4096;
const EXCHANGE_MAX_ITER: usize = 100;

/// Absolute slack for finite-difference derivative norms.
pub const FD_NOISE: f64 = 1e-6;

/// Discrete modulus of smoothness of order 1 or 2.
///
/// `cummax[j]` is the largest difference over grid points with step `h <= j / n`.
#[derive(Debug, Clone)]
pub struct ModulusTable {
    order: u8,
    n: usize,
    cummax: Vec<f64>,
}

impl ModulusTable {
    /// Builds the table from values at the `n + 1` uniform points of `[0, 1]`.
    pub fn from_samples(values: &[f64], order: u8) -> Result<Self> {
        let n = values.len().saturating_sub(1);
        if n < 2 {
            return Err(Error::InvalidGrid(
                "modulus needs at least 3 samples".into(),
            ));
        }
        let jmax = match order {
            1 => n,
            2 => n / 2,
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "order must be 1 or 2, got {order}"
                )))
            }
        };
        let mut per_step: Vec<f64> = (0..=jmax)
            .into_par_iter()
            .map(|j| {
                if j == 0 {
                    return 0.0;
                }
                match order {
                    1 => values[j..]
                        .iter()
                        .zip(values)
                        .fold(0.0f64, |acc, (b, a)| acc.max((b - a).abs())),
                    _ => (j..=n - j).fold(0.0f64, |acc, i| {
                        acc.max((values[i + j] - 2.0 * values[i] + values[i - j]).abs())
                    }),
                }
            })
            .collect();
        for j in 1..per_step.len() {
            per_step[j] = per_step[j].max(per_step[j - 1]);
        }
        Ok(Self {
            order,
            n,
            cummax: per_step,
        })
    }

    pub fn for_function(f: &FunctionSpec, order: u8, n: usize) -> Result<Self> {
        Self::from_samples(sample(f, n)?.values(), order)
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    /// Sup over grid steps `h <= delta`.
    pub fn eval(&self, delta: f64) -> f64 {
        if !(delta > 0.0) {
            return 0.0;
        }
        let j = (delta * self.n as f64 * (1.0 + 1e-12)).floor();
        let j = (j.min((self.cummax.len() - 1) as f64)) as usize;
        self.cummax[j]
    }
}

/// Discrete `omega_order(f; delta)` on the `n_omega` grid.
pub fn omega(order: u8, f: &FunctionSpec, delta: f64, n_omega: usize) -> Result<f64> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must be >= 0, got {delta}"
        )));
    }
    if n_omega < MIN_OMEGA_GRID {
        return Err(Error::InvalidParameter(format!(
            "omega grid must have at least {MIN_OMEGA_GRID} intervals, got {n_omega}"
        )));
    }
    Ok(ModulusTable::for_function(f, order, n_omega)?.eval(delta))
}

/// Discrete modulus of a grid function on `[0, 1]`.
pub fn omega_grid(order: u8, g: &GridFunction, delta: f64) -> Result<f64> {
    if g.lo() != 0.0 || g.hi() != 1.0 {
        return Err(Error::InvalidGrid("moduli are taken over [0, 1]".into()));
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must be >= 0, got {delta}"
        )));
    }
    Ok(ModulusTable::from_samples(g.values(), order)?.eval(delta))
}

/// A modulus evaluator: exact for the monomials, a discrete table otherwise.
#[derive(Debug, Clone)]
pub enum Modulus {
    Exact { f: FunctionSpec, order: u8 },
    Table(ModulusTable),
}

impl Modulus {
    pub fn eval(&self, delta: f64) -> f64 {
        match self {
            Modulus::Exact { f, order } => {
                f.closed_form_modulus(*order, delta).expect("exact modulus")
            }
            Modulus::Table(t) => t.eval(delta),
        }
    }
}

/// First- and second-order moduli of one function.
#[derive(Debug, Clone)]
pub struct Moduli {
    first: Modulus,
    second: Modulus,
}

impl Moduli {
    pub fn new(f: &FunctionSpec, n_omega: usize) -> Result<Self> {
        f.validate()?;
        if n_omega < MIN_OMEGA_GRID {
            return Err(Error::InvalidParameter(format!(
                "omega grid must have at least {MIN_OMEGA_GRID} intervals, got {n_omega}"
            )));
        }
        if f.closed_form_modulus(1, 0.0).is_some() {
            return Ok(Self {
                first: Modulus::Exact {
                    f: f.clone(),
                    order: 1,
                },
                second: Modulus::Exact {
                    f: f.clone(),
                    order: 2,
                },
            });
        }
        let values = sample(f, n_omega)?.into_values();
        Ok(Self {
            first: Modulus::Table(ModulusTable::from_samples(&values, 1)?),
            second: Modulus::Table(ModulusTable::from_samples(&values, 2)?),
        })
    }

    pub fn w1(&self, delta: f64) -> f64 {
        self.first.eval(delta)
    }

    pub fn w2(&self, delta: f64) -> f64 {
        self.second.eval(delta)
    }
}

/// Minimax line `slope * x + intercept` for `f` on a discrete subgrid of `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BestLinear {
    pub slope: f64,
    pub intercept: f64,
    /// Achieved sup error on the subgrid.
    pub deviation: f64,
    /// Final reference (alternation) points.
    pub reference: [f64; 3],
    /// Set when the exchange did not settle and the dense search was used.
    pub fallback: bool,
}

impl BestLinear {
    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Best approximation by polynomials of degree at most one, by three-point exchange.
pub fn best_linear(f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<BestLinear> {
    if !(a < b) {
        return Err(Error::InvalidParameter(format!(
            "need a < b, got [{a}, {b}]"
        )));
    }
    let xs = uniform_points(a, b, MINIMAX_POINTS);
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let sup_err = |s: f64, c: f64| -> (usize, f64) {
        fs.iter()
            .zip(&xs)
            .map(|(fv, x)| fv - s * x - c)
            .enumerate()
            .fold(
                (0, 0.0),
                |(bi, be): (usize, f64), (i, e)| {
                    if e.abs() > be.abs() {
                        (i, e)
                    } else {
                        (bi, be)
                    }
                },
            )
    };

    let mut r = [0, MINIMAX_POINTS / 2, MINIMAX_POINTS];
    for _ in 0..EXCHANGE_MAX_ITER {
        let [i0, i1, i2] = r;
        let s = (fs[i2] - fs[i0]) / (xs[i2] - xs[i0]);
        let u0 = fs[i0] - s * xs[i0];
        let u1 = fs[i1] - s * xs[i1];
        let c = 0.5 * (u0 + u1);
        let level = 0.5 * (u0 - u1);
        let (imax, emax) = sup_err(s, c);
        if emax.abs() <= level.abs() * (1.0 + 1e-12) + 1e-15 {
            return Ok(BestLinear {
                slope: s,
                intercept: c,
                deviation: emax.abs().max(level.abs()),
                reference: [xs[i0], xs[i1], xs[i2]],
                fallback: false,
            });
        }
        let err_at = |i: usize| fs[i] - s * xs[i] - c;
        let same = |i: usize| err_at(i).signum() == emax.signum();
        r = if imax < i0 {
            if same(i0) {
                [imax, i1, i2]
            } else {
                [imax, i0, i1]
            }
        } else if imax < i1 {
            if same(i0) {
                [imax, i1, i2]
            } else {
                [i0, imax, i2]
            }
        } else if imax < i2 {
            if same(i1) {
                [i0, imax, i2]
            } else {
                [i0, i1, imax]
            }
        } else if same(i2) {
            [i0, i1, imax]
        } else {
            [i1, i2, imax]
        };
        if r[0] == r[1] || r[1] == r[2] {
            break;
        }
    }
    Ok(dense_minimax(&xs, &fs))
}

/// Minimax line by golden-section search on the slope; the sup error is convex in it.
fn dense_minimax(xs: &[f64], fs: &[f64]) -> BestLinear {
    let spread = |s: f64| -> (f64, f64) {
        let (lo, hi) = fs
            .iter()
            .zip(xs)
            .map(|(f, x)| f - s * x)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), u| {
                (lo.min(u), hi.max(u))
            });
        (0.5 * (hi - lo), 0.5 * (hi + lo))
    };
    let lip = xs
        .windows(2)
        .zip(fs.windows(2))
        .map(|(x, f)| ((f[1] - f[0]) / (x[1] - x[0])).abs())
        .fold(0.0, f64::max);
    let (mut lo, mut hi) = (-lip - 1.0, lip + 1.0);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let m1 = hi - phi * (hi - lo);
        let m2 = lo + phi * (hi - lo);
        if spread(m1).0 <= spread(m2).0 {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let s = 0.5 * (lo + hi);
    let (dev, c) = spread(s);
    let a = xs[0];
    let b = xs[xs.len() - 1];
    BestLinear {
        slope: s,
        intercept: c,
        deviation: dev,
        reference: [a, 0.5 * (a + b), b],
        fallback: true,
    }
}

/// `f` extended to `[-h, 1 + h]` by its minimax lines on `[0, h]` and `[1 - h, 1]`.
#[derive(Debug, Clone)]
pub struct Extension {
    f: FunctionSpec,
    h: f64,
    pub lower: BestLinear,
    pub upper: BestLinear,
}

impl Extension {
    pub fn new(f: &FunctionSpec, h: f64) -> Result<Self> {
        f.validate()?;
        if !(h > 0.0 && h < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "extension width must lie in (0, 1/2), got {h}"
            )));
        }
        Ok(Self {
            f: f.clone(),
            h,
            lower: best_linear(|x| f.eval(x), 0.0, h)?,
            upper: best_linear(|x| f.eval(x), 1.0 - h, 1.0)?,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x < 0.0 {
            self.lower.eval(x)
        } else if x > 1.0 {
            self.upper.eval(x)
        } else {
            self.f.eval(x)
        }
    }

    /// Samples the extension at `n + 1` uniform points of `[-h, 1 + h]`.
    pub fn to_grid(&self, n: usize) -> Result<GridFunction> {
        GridFunction::from_fn(-self.h, 1.0 + self.h, n, |x| self.eval(x))
    }

    /// `Z_h f(x) = (1/h) ∫_{-h}^{h} (1 - |t|/h) f_h(x + t) dt`.
    ///
    /// Composite Simpson on the pieces between the kernel peak, the seams
    /// `0` and `1`, and the kinks of `f`, so each piece integrates a smooth function.
    pub fn smooth_at(&self, x: f64) -> f64 {
        let h = self.h;
        let mut cuts = vec![-h, 0.0, h, -x, 1.0 - x];
        cuts.extend(self.f.kinks().into_iter().map(|c| c - x));
        cuts.retain(|t| (-h..=h).contains(t));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * h);
        let integrand = |t: f64| (1.0 - t.abs() / h) * self.eval(x + t);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (u, v) = (w[0], w[1]);
            if v - u <= 0.0 {
                continue;
            }
            let mut panels = ((SIMPSON_PANELS as f64) * (v - u) / h).ceil() as usize;
            panels = panels.max(2);
            panels += panels % 2;
            total += simpson(&integrand, u, v, panels);
        }
        total / h
    }
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let step = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + step * i as f64);
    }
    acc * step / 3.0
}

/// The extension `f_h` sampled on `n + 1` points of `[-h, 1 + h]`.
pub fn extend(f: &FunctionSpec, h: f64, n: usize) -> Result<GridFunction> {
    Extension::new(f, h)?.to_grid(n)
}

/// `Z_h f` on `[0, 1]` with finite-difference estimates of its derivative norms.
#[derive(Debug, Clone, Serialize)]
pub struct SmoothedFunction {
    pub zf: GridFunction,
    pub h: f64,
    /// `max |Δ zf| / dx`.
    pub d1_bound: f64,
    /// `max |Δ² zf| / dx²`.
    pub d2_bound: f64,
}

impl SmoothedFunction {
    /// `(1/h)(2 ω1(f;h) + (3/2) ω2(f;h))`.
    pub fn d1_limit(&self, moduli: &Moduli) -> f64 {
        (2.0 * moduli.w1(self.h) + 1.5 * moduli.w2(self.h)) / self.h
    }

    /// `(3/2) ω2(f;h) / h²`.
    pub fn d2_limit(&self, moduli: &Moduli) -> f64 {
        1.5 * moduli.w2(self.h) / (self.h * self.h)
    }
}

fn derivative_norms(g: &GridFunction) -> (f64, f64) {
    let v = g.values();
    let dx = g.spacing();
    let d1 = v
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(0.0, f64::max)
        / dx;
    let d2 = v
        .windows(3)
        .map(|w| (w[2] - 2.0 * w[1] + w[0]).abs())
        .fold(0.0, f64::max)
        / (dx * dx);
    (d1, d2)
}

/// Zhuk's function `Z_h f` on the `n + 1` grid of `[0, 1]`.
pub fn zhuk(f: &FunctionSpec, h: f64, n: usize) -> Result<SmoothedFunction> {
    let ext = Extension::new(f, h)?;
    if 2.0 * h * (n as f64) < 8.0 {
        return Err(Error::InvalidParameter(format!(
            "h = {h} spans fewer than 8 grid nodes on a grid of {n} intervals"
        )));
    }
    let xs = uniform_points(0.0, 1.0, n);
    let values: Vec<f64> = xs.par_iter().map(|&x| ext.smooth_at(x)).collect();
    let zf = GridFunction::new(0.0, 1.0, values)?;
    let (d1_bound, d2_bound) = derivative_norms(&zf);
    Ok(SmoothedFunction {
        zf,
        h,
        d1_bound,
        d2_bound,
    })
}

/// Measured quantities of `g = B_l(Z_h f)` against their modulus bounds.
#[derive(Debug, Clone, Serialize)]
pub struct ZhukReport {
    pub function: String,
    pub h: f64,
    pub l: usize,
    pub omega1: f64,
    pub omega2: f64,
    /// `||B_l(Z_h f) - Z_h f||`.
    pub epsilon: f64,
    /// `||f - g||`.
    pub approx_error: f64,
    /// `(3/4) ω2(f;h) + ε`.
    pub approx_bound: f64,
    /// `||g'||` by finite differences.
    pub d1: f64,
    pub d1_limit: f64,
    /// `||g''||` by finite differences.
    pub d2: f64,
    pub d2_limit: f64,
    /// `||(Z_h f)'||` and `||(Z_h f)''||` by finite differences.
    pub zf_d1: f64,
    pub zf_d2: f64,
}

impl ZhukReport {
    /// Derivative norms within `(1 + rel_slack)` of their bounds, approximation error within its bound.
    ///
    /// Finite differences carry roundoff of order `eps / dx^2`, absorbed by [`FD_NOISE`].
    pub fn passes(&self, rel_slack: f64) -> bool {
        self.d1 <= self.d1_limit * (1.0 + rel_slack) + FD_NOISE
            && self.d2 <= self.d2_limit * (1.0 + rel_slack) + FD_NOISE
            && self.approx_error <= self.approx_bound + 1e-12
    }
}

pub fn check_zhuk_bounds(f: &FunctionSpec, h: f64, l: usize) -> Result<ZhukReport> {
    check_zhuk_bounds_with(f, h, l, DEFAULT_GRID, DEFAULT_OMEGA_GRID)
}

pub fn check_zhuk_bounds_with(
    f: &FunctionSpec,
    h: f64,
    l: usize,
    n: usize,
    n_omega: usize,
) -> Result<ZhukReport> {
    let bern = make_bernstein(l)?;
    let ext = Extension::new(f, h)?;
    let smoothed = zhuk(f, h, n)?;
    let at_nodes: Vec<f64> = bern.nodes().par_iter().map(|&t| ext.smooth_at(t)).collect();
    let xs = uniform_points(0.0, 1.0, n);
    let g_values: Vec<f64> = xs
        .par_iter()
        .map(|&x| bern.apply_values(&at_nodes, x))
        .collect();
    let g = GridFunction::new(0.0, 1.0, g_values)?;
    let (d1, d2) = derivative_norms(&g);
    let epsilon = crate::gridfn::sup_diff(&g, &smoothed.zf)?;
    let approx_error = g
        .values()
        .iter()
        .zip(&xs)
        .map(|(gv, &x)| (f.eval(x) - gv).abs())
        .fold(0.0, f64::max);
    let moduli = Moduli::new(f, n_omega)?;
    let (omega1, omega2) = (moduli.w1(h), moduli.w2(h));
    Ok(ZhukReport {
        function: f.to_string(),
        h,
        l,
        omega1,
        omega2,
        epsilon,
        approx_error,
        approx_bound: 0.75 * omega2 + epsilon,
        d1,
        d1_limit: smoothed.d1_limit(&moduli),
        d2,
        d2_limit: smoothed.d2_limit(&moduli),
        zf_d1: smoothed.d1_bound,
        zf_d2: smoothed.d2_bound,
    })
}
