//! Pointwise error estimates for `|T^∞(f;x) - T^m(f;x)|` and their verification
//! against the true iterate error.
//!
//! Every estimate is a combination of `ω1(f; ·)` and `ω2(f; ·)` evaluated at
//! moment gaps. [`Analysis`] caches everything that depends only on the
//! operator (transition matrix, sign class, limit), so a sweep over functions
//! and iteration counts reuses it.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gridfn::{FunctionSpec, GridFunction, DEFAULT_GRID};
use crate::iterate::{
    converge_limit, GridEvaluator, LimitInfo, LimitKind, TransitionMatrix, DEFAULT_M_MAX,
    DEFAULT_TOL,
};
use crate::operators::{classify_sign, SamplingOperator, SignClass, SignTag};
use crate::smoothness::{Moduli, DEFAULT_OMEGA_GRID};

/// `1e-6 + 4 / n_omega`.
pub fn default_slack(n_omega: usize) -> f64 {
    1e-6 + 4.0 / n_omega as f64
}

/// Slack used by the envelope and Cauchy-gap checks.
pub const EXACT_SLACK: f64 = 1e-9;

/// The estimates, in the order [`Analysis::select`] prefers them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimate {
    /// `T(e1) = e1`, `T(e2) >= a e2 + (1-a) e1`: `(3/4) ω2(f; sqrt(a^m x(1-x)))` against `P`.
    GeometricP,
    /// `T(e1) = e1`: `(3/4) ω2(f; sqrt(F))`.
    E1Preserving,
    /// `T(e1) = e1`, limit `P`: `(3/4) ω2(f; sqrt|x - T^m(e2;x)|)`.
    LimitP,
    /// `T(e1) <= e1`, `T(e2) = e2`, limit `V`.
    LimitVLeq,
    /// `T(e1) >= e1`, `T(e2) = e2`, limit `V`.
    LimitVGeq,
    /// `T(e1) <= e1`, limit `f(0)`.
    LimitEval0,
    /// `T(e1) >= e1`, limit `f(1)`.
    LimitEval1,
    /// `T(e1) <= e1`, arbitrary limit.
    MonotoneLeq,
    /// `T(e1) >= e1`, arbitrary limit.
    MonotoneGeq,
}

impl Estimate {
    pub const PREFERENCE: [Estimate; 9] = [
        Estimate::GeometricP,
        Estimate::E1Preserving,
        Estimate::LimitP,
        Estimate::LimitVLeq,
        Estimate::LimitVGeq,
        Estimate::LimitEval0,
        Estimate::LimitEval1,
        Estimate::MonotoneGeq,
        Estimate::MonotoneLeq,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Estimate::GeometricP => "geometric-p",
            Estimate::E1Preserving => "e1-preserving",
            Estimate::LimitP => "limit-p",
            Estimate::LimitVLeq => "limit-v-leq",
            Estimate::LimitVGeq => "limit-v-geq",
            Estimate::LimitEval0 => "limit-eval0",
            Estimate::LimitEval1 => "limit-eval1",
            Estimate::MonotoneLeq => "monotone-leq",
            Estimate::MonotoneGeq => "monotone-geq",
        }
    }
}

impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Direction of `T(e1) - e1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Leq,
    Geq,
}

/// `E = |(T^m - T^∞)(e1)|` and `F = |(T^∞ - T^m)(e2)|` on the evaluation grid.
#[derive(Debug, Clone, Serialize)]
pub struct MomentGaps {
    pub e1_gap: GridFunction,
    pub e2_gap: GridFunction,
    pub m: u64,
}

impl MomentGaps {
    pub fn zero(lo: f64, hi: f64, n: usize, m: u64) -> Result<Self> {
        let z = GridFunction::from_fn(lo, hi, n, |_| 0.0)?;
        Ok(Self {
            e1_gap: z.clone(),
            e2_gap: z,
            m,
        })
    }
}

fn pointwise(a: &GridFunction, f: impl Fn(f64, usize) -> f64) -> GridFunction {
    let values = (0..a.values().len()).map(|i| f(a.x(i), i)).collect();
    GridFunction::new(a.lo(), a.hi(), values).expect("same grid")
}

/// Monotone case: `3ω2(E) + 2ω1(E) + (3/4)ω2(sqrt(F + 2E))` for `Leq`, `sqrt(F)` for `Geq`.
pub fn bound_monotone(side: Side, moduli: &Moduli, gaps: &MomentGaps) -> GridFunction {
    let e = gaps.e1_gap.values();
    let f = gaps.e2_gap.values();
    pointwise(&gaps.e1_gap, |_, i| {
        let arg = match side {
            Side::Leq => f[i] + 2.0 * e[i],
            Side::Geq => f[i],
        };
        3.0 * moduli.w2(e[i]) + 2.0 * moduli.w1(e[i]) + 0.75 * moduli.w2(arg.sqrt())
    })
}

/// `(3/4) ω2(f; sqrt(F))`; requires `T(e1) = e1`.
pub fn bound_e1_preserving(
    moduli: &Moduli,
    gaps: &MomentGaps,
    sign: &SignClass,
) -> Result<GridFunction> {
    if sign.tag != SignTag::PreservesE1 {
        return Err(Error::Hypothesis {
            estimate: Estimate::E1Preserving.id(),
            condition: format!("T(e1) = e1 (sign class is {})", sign.tag),
        });
    }
    let f = gaps.e2_gap.values();
    Ok(pointwise(&gaps.e2_gap, |_, i| {
        0.75 * moduli.w2(f[i].sqrt())
    }))
}

/// `(3/4) ω2(f; sqrt(a^m x (1 - x)))` on the points `xs`.
pub fn bound_geometric(
    moduli: &Moduli,
    a: f64,
    m: u64,
    grid: &GridFunction,
) -> Result<GridFunction> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::Hypothesis {
            estimate: Estimate::GeometricP.id(),
            condition: format!("0 < a < 1 (a = {a})"),
        });
    }
    let am = a.powf(m as f64);
    Ok(pointwise(grid, |x, _| {
        0.75 * moduli.w2((am * x * (1.0 - x)).max(0.0).sqrt())
    }))
}

/// Options for [`Analysis`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    /// Intervals of the evaluation grid.
    pub grid: usize,
    /// Intervals of the grid used for moduli.
    pub omega_grid: usize,
    /// Cauchy tolerance for the limit.
    pub tol: f64,
    pub m_max: u64,
    /// Allowed negative margin; `None` means [`default_slack`].
    pub slack: Option<f64>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            grid: DEFAULT_GRID,
            omega_grid: DEFAULT_OMEGA_GRID,
            tol: DEFAULT_TOL,
            m_max: DEFAULT_M_MAX,
            slack: None,
        }
    }
}

impl VerifyConfig {
    pub fn slack(&self) -> f64 {
        self.slack.unwrap_or_else(|| default_slack(self.omega_grid))
    }
}

/// Operator-level data shared by all estimates.
#[derive(Debug, Clone)]
pub struct Analysis {
    op: SamplingOperator,
    config: VerifyConfig,
    matrix: TransitionMatrix,
    eval: GridEvaluator,
    sign: SignClass,
    preserves_e2: bool,
    limit: LimitInfo,
    contraction: Option<f64>,
}

impl Analysis {
    pub fn new(op: &SamplingOperator, config: VerifyConfig) -> Result<Self> {
        if config.grid == 0 {
            return Err(Error::InvalidGrid(
                "evaluation grid needs at least one interval".into(),
            ));
        }
        let sign = classify_sign(op);
        let limit = converge_limit(op, config.tol, config.m_max, config.grid)?;
        let contraction = (sign.tag == SignTag::PreservesE1)
            .then(|| second_moment_contraction(op))
            .flatten();
        Ok(Self {
            op: op.clone(),
            config,
            matrix: TransitionMatrix::new(op),
            eval: GridEvaluator::new(op, config.grid),
            sign,
            preserves_e2: op.preserves_e2(),
            limit,
            contraction,
        })
    }

    pub fn operator(&self) -> &SamplingOperator {
        &self.op
    }

    pub fn config(&self) -> &VerifyConfig {
        &self.config
    }

    pub fn sign(&self) -> &SignClass {
        &self.sign
    }

    pub fn limit(&self) -> &LimitInfo {
        &self.limit
    }

    pub fn preserves_e2(&self) -> bool {
        self.preserves_e2
    }

    /// Smallest `a` with `T(e2) >= a e2 + (1 - a) e1` on the probe grid, when `T(e1) = e1`.
    pub fn contraction(&self) -> Option<f64> {
        self.contraction
    }

    pub fn xs(&self) -> Vec<f64> {
        self.eval.xs()
    }

    fn node_iterate(&self, fhat: &[f64], m: u64) -> Vec<f64> {
        self.matrix.power_apply(fhat, m - 1)
    }

    /// `T^m(f; ·)` on the evaluation grid.
    pub fn iterate(&self, f: impl Fn(f64) -> f64, m: u64) -> GridFunction {
        if m == 0 {
            return GridFunction::from_fn(0.0, self.op.domain_hi(), self.config.grid, f)
                .expect("evaluation grid");
        }
        let fhat: Vec<f64> = self.op.nodes().iter().map(|&t| f(t)).collect();
        self.eval.eval(&self.node_iterate(&fhat, m))
    }

    /// `(T^m(e1), T^m(e2))`.
    pub fn moments(&self, m: u64) -> (GridFunction, GridFunction) {
        (self.iterate(|t| t, m), self.iterate(|t| t * t, m))
    }

    /// `(T^∞(e1), T^∞(e2))`, in closed form when the limit was classified.
    pub fn limit_moments(&self) -> (GridFunction, GridFunction) {
        match self.limit.kind {
            LimitKind::General => (self.limit.limit_e1.clone(), self.limit.limit_e2.clone()),
            kind => {
                let grid = &self.limit.limit_e1;
                (
                    grid.map_with_x(|x, _| kind.moments_at(x).expect("closed form").0),
                    grid.map_with_x(|x, _| kind.moments_at(x).expect("closed form").1),
                )
            }
        }
    }

    pub fn gaps(&self, m: u64) -> MomentGaps {
        let (t1, t2) = self.moments(m);
        let (l1, l2) = self.limit_moments();
        MomentGaps {
            e1_gap: zip_abs(&t1, &l1),
            e2_gap: zip_abs(&l2, &t2),
            m,
        }
    }

    /// Checks the hypotheses of `est`, naming the first one that fails.
    pub fn check(&self, est: Estimate) -> Result<()> {
        let fail = |condition: String| {
            Err(Error::Hypothesis {
                estimate: est.id(),
                condition,
            })
        };
        let tag = self.sign.tag;
        let kind = self.limit.kind;
        let need_sign = |ok: bool, want: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                fail(format!("{want} (sign class is {tag})"))
            }
        };
        let need_limit = |want: LimitKind| -> Result<()> {
            if kind == want {
                Ok(())
            } else {
                fail(format!("T^∞ = {want} (limit classified as {kind})"))
            }
        };
        let need_e2 = || -> Result<()> {
            if self.preserves_e2 {
                Ok(())
            } else {
                fail("T(e2) = e2".into())
            }
        };
        match est {
            Estimate::GeometricP => {
                need_sign(tag == SignTag::PreservesE1, "T(e1) = e1")?;
                match self.contraction {
                    Some(a) if a > 0.0 && a < 1.0 => Ok(()),
                    Some(a) => fail(format!(
                        "T(e2) >= a e2 + (1-a) e1 with 0 < a < 1 (best a = {a})"
                    )),
                    None => fail("T(e2) >= a e2 + (1-a) e1 with 0 < a < 1".into()),
                }
            }
            Estimate::E1Preserving => need_sign(tag == SignTag::PreservesE1, "T(e1) = e1"),
            Estimate::LimitP => {
                need_sign(tag == SignTag::PreservesE1, "T(e1) = e1")?;
                need_limit(LimitKind::P)
            }
            Estimate::LimitVLeq => {
                need_sign(self.sign.is_leq(), "T(e1) <= e1")?;
                need_e2()?;
                need_limit(LimitKind::V)
            }
            Estimate::LimitVGeq => {
                need_sign(self.sign.is_geq(), "T(e1) >= e1")?;
                need_e2()?;
                need_limit(LimitKind::V)
            }
            Estimate::LimitEval0 => {
                need_sign(self.sign.is_leq(), "T(e1) <= e1")?;
                need_limit(LimitKind::Eval0)
            }
            Estimate::LimitEval1 => {
                need_sign(self.sign.is_geq(), "T(e1) >= e1")?;
                need_limit(LimitKind::Eval1)
            }
            Estimate::MonotoneLeq => need_sign(self.sign.is_leq(), "T(e1) <= e1"),
            Estimate::MonotoneGeq => need_sign(self.sign.is_geq(), "T(e1) >= e1"),
        }
    }

    /// Estimates whose hypotheses hold, in preference order.
    pub fn applicable(&self) -> Vec<Estimate> {
        Estimate::PREFERENCE
            .into_iter()
            .filter(|&e| self.check(e).is_ok())
            .collect()
    }

    /// The sharpest applicable estimate.
    pub fn select(&self) -> Result<Estimate> {
        self.applicable().into_iter().next().ok_or_else(|| {
            let witness = self
                .sign
                .witness
                .map(|x| format!(" near x = {x}"))
                .unwrap_or_default();
            Error::NoApplicableEstimate(format!(
                "{} changes sign of T(e1) - e1{witness}",
                self.op.name()
            ))
        })
    }

    /// Right-hand side of `est` at iteration `m`.
    pub fn bound(&self, est: Estimate, moduli: &Moduli, m: u64) -> Result<GridFunction> {
        self.check(est)?;
        match est {
            Estimate::GeometricP => {
                let a = self.contraction.expect("checked");
                bound_geometric(moduli, a, m, &self.limit.limit_e1)
            }
            Estimate::E1Preserving => bound_e1_preserving(moduli, &self.gaps(m), &self.sign),
            Estimate::LimitP => {
                let (_, t2) = self.moments(m);
                let v = t2.values();
                Ok(pointwise(&t2, |x, i| {
                    0.75 * moduli.w2((x - v[i]).abs().sqrt())
                }))
            }
            Estimate::LimitVLeq | Estimate::LimitVGeq => {
                let (t1, _) = self.moments(m);
                let v = t1.values();
                let with_root = est == Estimate::LimitVLeq;
                Ok(pointwise(&t1, |x, i| {
                    let d = (v[i] - x * x).abs();
                    let mut b = 3.0 * moduli.w2(d) + 2.0 * moduli.w1(d);
                    if with_root {
                        b += 0.75 * moduli.w2((2.0 * d).sqrt());
                    }
                    b
                }))
            }
            Estimate::LimitEval0 | Estimate::LimitEval1 => {
                let (t1, t2) = self.moments(m);
                let (v1, v2) = (t1.values(), t2.values());
                let at_zero = est == Estimate::LimitEval0;
                Ok(pointwise(&t1, |_, i| {
                    let (d, arg) = if at_zero {
                        (v1[i].abs(), v2[i].abs() + 2.0 * v1[i].abs())
                    } else {
                        ((v1[i] - 1.0).abs(), (v2[i] - 1.0).abs())
                    };
                    3.0 * moduli.w2(d) + 2.0 * moduli.w1(d) + 0.75 * moduli.w2(arg.sqrt())
                }))
            }
            Estimate::MonotoneLeq => Ok(bound_monotone(Side::Leq, moduli, &self.gaps(m))),
            Estimate::MonotoneGeq => Ok(bound_monotone(Side::Geq, moduli, &self.gaps(m))),
        }
    }

    /// The limit an estimate compares `T^m f` against, applied to `f`.
    pub fn limit_values(&self, est: Estimate, f: &FunctionSpec) -> GridFunction {
        let closed = match est {
            Estimate::GeometricP | Estimate::LimitP => Some(LimitKind::P),
            Estimate::LimitVLeq | Estimate::LimitVGeq => Some(LimitKind::V),
            Estimate::LimitEval0 => Some(LimitKind::Eval0),
            Estimate::LimitEval1 => Some(LimitKind::Eval1),
            Estimate::E1Preserving | Estimate::MonotoneLeq | Estimate::MonotoneGeq => None,
        };
        match closed {
            Some(kind) => self
                .limit
                .limit_e1
                .map_with_x(|x, _| kind.apply(f, x).expect("closed form")),
            None => self.limit.apply(&self.op, &self.eval, f),
        }
    }

    /// `|T^∞(f; x) - T^m(f; x)|` with the limit `est` refers to.
    pub fn actual(&self, est: Estimate, f: &FunctionSpec, m: u64) -> GridFunction {
        let lim = self.limit_values(est, f);
        let it = self.iterate(|t| f.eval(t), m);
        zip_abs(&lim, &it)
    }

    /// Compares the selected estimate with the true error of `T^m f`.
    pub fn verify(&self, f: &FunctionSpec, m: u64) -> Result<BoundReport> {
        let moduli = Moduli::new(f, self.config.omega_grid)?;
        self.verify_with(f, &moduli, m, self.select()?)
    }

    /// As [`Analysis::verify`] with precomputed moduli and a fixed estimate.
    pub fn verify_with(
        &self,
        f: &FunctionSpec,
        moduli: &Moduli,
        m: u64,
        est: Estimate,
    ) -> Result<BoundReport> {
        let bound = self.bound(est, moduli, m)?;
        let actual = self.actual(est, f, m);
        Ok(BoundReport::new(
            self.op.name(),
            f.to_string(),
            m,
            est,
            self.xs(),
            actual.into_values(),
            bound.into_values(),
            self.config.slack(),
        ))
    }
}

fn zip_abs(a: &GridFunction, b: &GridFunction) -> GridFunction {
    let bv = b.values();
    pointwise(a, |_, i| (a.values()[i] - bv[i]).abs())
}

/// `max (x - T(e2;x)) / (x (1 - x))` over interior probe points.
fn second_moment_contraction(op: &SamplingOperator) -> Option<f64> {
    let t2: Vec<f64> = op.nodes().iter().map(|t| t * t).collect();
    let ratios: Vec<f64> = op
        .probe_points()
        .into_iter()
        .filter(|&x| x * (1.0 - x) > 1e-6)
        .map(|x| (x - op.apply_values(&t2, x)) / (x * (1.0 - x)))
        .collect();
    let a = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    a.is_finite().then_some(a)
}

/// A point where the estimate fell below the true error by more than the slack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub x: f64,
    pub actual: f64,
    pub bound: f64,
    pub margin: f64,
}

/// Per-point comparison of an estimate with the true iterate error.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub operator: String,
    pub function: String,
    pub m: u64,
    pub theorem_id: Estimate,
    pub xs: Vec<f64>,
    pub actual: Vec<f64>,
    pub bound: Vec<f64>,
    pub margin: Vec<f64>,
    pub slack: f64,
    pub violations: Vec<Violation>,
}

impl BoundReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        operator: impl Into<String>,
        function: impl Into<String>,
        m: u64,
        theorem_id: Estimate,
        xs: Vec<f64>,
        actual: Vec<f64>,
        bound: Vec<f64>,
        slack: f64,
    ) -> Self {
        let margin: Vec<f64> = bound.iter().zip(&actual).map(|(b, a)| b - a).collect();
        let violations = xs
            .iter()
            .zip(&actual)
            .zip(&bound)
            .zip(&margin)
            .filter(|(_, &g)| g < -slack)
            .map(|(((&x, &actual), &bound), &margin)| Violation {
                x,
                actual,
                bound,
                margin,
            })
            .collect();
        Self {
            operator: operator.into(),
            function: function.into(),
            m,
            theorem_id,
            xs,
            actual,
            bound,
            margin,
            slack,
            violations,
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn min_margin(&self) -> f64 {
        self.margin.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Runs the full pipeline for one operator, function and iteration count.
pub fn verify(
    op: &SamplingOperator,
    f: &FunctionSpec,
    m: u64,
    n: usize,
    slack: Option<f64>,
) -> Result<BoundReport> {
    let config = VerifyConfig {
        grid: n,
        slack,
        ..VerifyConfig::default()
    };
    Analysis::new(op, config)?.verify(f, m)
}

/// Check of `x^2 <= T^m(e2;x) <= a^m x^2 + (1 - a^m) x`.
#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeReport {
    pub operator: String,
    pub a: f64,
    pub m: u64,
    /// `max (x^2 - T^m(e2;x))`, positive when the lower side fails.
    pub lower_excess: f64,
    /// `max (T^m(e2;x) - upper(x))`, positive when the upper side fails.
    pub upper_excess: f64,
    /// `max |upper(x) - T^m(e2;x)|`.
    pub upper_gap: f64,
    pub violations: usize,
}

impl EnvelopeReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

pub fn moment_envelope(op: &SamplingOperator, a: f64, m: u64, n: usize) -> Result<EnvelopeReport> {
    if n == 0 {
        return Err(Error::InvalidGrid("need at least one interval".into()));
    }
    let t2 = crate::iterate::apply_power_fn(op, |t| t * t, m, n)?;
    let am = a.powf(m as f64);
    let mut report = EnvelopeReport {
        operator: op.name().to_string(),
        a,
        m,
        lower_excess: f64::NEG_INFINITY,
        upper_excess: f64::NEG_INFINITY,
        upper_gap: 0.0,
        violations: 0,
    };
    for (i, &v) in t2.values().iter().enumerate() {
        let x = t2.x(i);
        let upper = am * x * x + (1.0 - am) * x;
        let lo = x * x - v;
        let hi = v - upper;
        report.lower_excess = report.lower_excess.max(lo);
        report.upper_excess = report.upper_excess.max(hi);
        report.upper_gap = report.upper_gap.max(hi.abs());
        if lo > EXACT_SLACK || hi > EXACT_SLACK {
            report.violations += 1;
        }
    }
    Ok(report)
}

/// Check of `|T^(m+p)(g) - T^m(g)| <= (1/2)||g''|| |Δ T(e2)| + c |Δ T(e1)|` pointwise.
///
/// `c = ||g'||` when `T(e1) >= e1`; when `T(e1) <= e1` the comparison
/// functions are built on `1 - t` and `c = ||g'|| + ||g''||`.
#[derive(Debug, Clone, Serialize)]
pub struct CauchyReport {
    pub operator: String,
    pub function: String,
    pub m: u64,
    pub p: u64,
    pub e1_coefficient: f64,
    /// `max (lhs - rhs)`.
    pub worst_excess: f64,
    pub violations: usize,
}

impl CauchyReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

pub fn cauchy_gap(
    op: &SamplingOperator,
    g: &FunctionSpec,
    m: u64,
    p: u64,
    n: usize,
) -> Result<CauchyReport> {
    let (d1, d2) = g
        .derivative_norms()
        .ok_or_else(|| Error::InvalidParameter(format!("{g} has no catalog derivative norms")))?;
    let sign = classify_sign(op);
    let e1_coefficient = match sign.tag {
        SignTag::PreservesE1 | SignTag::GeqE1 => d1,
        SignTag::LeqE1 => d1 + d2,
        SignTag::Mixed => {
            return Err(Error::Hypothesis {
                estimate: "cauchy-gap",
                condition: format!("T(e1) - e1 of one sign (sign class is {})", sign.tag),
            })
        }
    };
    let at = |f: &dyn Fn(f64) -> f64, k: u64| crate::iterate::apply_power_fn(op, f, k, n);
    let g_m = at(&|t| g.eval(t), m)?;
    let g_mp = at(&|t| g.eval(t), m + p)?;
    let e1_m = at(&|t| t, m)?;
    let e1_mp = at(&|t| t, m + p)?;
    let e2_m = at(&|t| t * t, m)?;
    let e2_mp = at(&|t| t * t, m + p)?;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut violations = 0;
    for i in 0..g_m.values().len() {
        let lhs = (g_mp.values()[i] - g_m.values()[i]).abs();
        let rhs = 0.5 * d2 * (e2_mp.values()[i] - e2_m.values()[i]).abs()
            + e1_coefficient * (e1_m.values()[i] - e1_mp.values()[i]).abs();
        let excess = lhs - rhs;
        worst_excess = worst_excess.max(excess);
        if excess > EXACT_SLACK {
            violations += 1;
        }
    }
    Ok(CauchyReport {
        operator: op.name().to_string(),
        function: g.to_string(),
        m,
        p,
        e1_coefficient,
        worst_excess,
        violations,
    })
}

/// Whether `T^m(g;x)` is nondecreasing in `m` at every grid point, for `m` in `0..=m_last`.
pub fn monotone_iterates(
    op: &SamplingOperator,
    g: &FunctionSpec,
    m_last: u64,
    n: usize,
    slack: f64,
) -> Result<bool> {
    let mut prev = crate::iterate::apply_power(op, g, 0, n)?;
    for m in 1..=m_last {
        let next = crate::iterate::apply_power(op, g, m, n)?;
        if prev
            .values()
            .iter()
            .zip(next.values())
            .any(|(a, b)| *b < *a - slack)
        {
            return Ok(false);
        }
        prev = next;
    }
    Ok(true)
}

/// `T(e2;x) - x^2` has no sign restriction; exposed for hypothesis reports.
pub fn second_moment_excess(op: &SamplingOperator) -> (f64, f64) {
    op.moment_deviation(2)
}
