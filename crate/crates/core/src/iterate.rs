//! Exact iteration of sampling operators through their transition matrices.
//!
//! With `A[j][k] = phi_k(t_j)` and `f̂_j = f(t_j)`, the iterates are
//! `T^m(f; x) = sum_k phi_k(x) (A^(m-1) f̂)_k` for `m >= 1`.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gridfn::{sample_on, FunctionSpec, GridFunction};
use crate::operators::SamplingOperator;

/// Default Cauchy tolerance for limit detection.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Default iteration cap (sixty squarings).
pub const DEFAULT_M_MAX: u64 = 1 << 60;

/// Sup-distance at which limit moments are matched against `P`, `V`, `f(0)`, `f(1)`.
pub const CLASSIFY_TOL: f64 = 1e-8;

/// Row-stochastic matrix `A[j][k] = phi_k(t_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    nodes: Vec<f64>,
    size: usize,
    data: Vec<f64>,
}

impl TransitionMatrix {
    pub fn new(op: &SamplingOperator) -> Self {
        let size = op.len();
        let mut data = vec![0.0; size * size];
        for (row, &t) in data.chunks_mut(size).zip(op.nodes()) {
            op.weights_into(t, row);
        }
        Self {
            nodes: op.nodes().to_vec(),
            size,
            data,
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.size..(j + 1) * self.size]
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.data[j * self.size + k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.size)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.rows()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Self) -> Self {
        let n = self.size;
        let mut data = vec![0.0; n * n];
        data.par_chunks_mut(n).enumerate().for_each(|(j, out)| {
            for (k, &a) in self.row(j).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, b) in out.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        });
        Self {
            nodes: self.nodes.clone(),
            size: n,
            data,
        }
    }

    /// `A^k v`.
    pub fn power_apply(&self, v: &[f64], k: u64) -> Vec<f64> {
        if k <= 8 * self.size as u64 {
            let mut out = v.to_vec();
            for _ in 0..k {
                out = self.mul_vec(&out);
            }
            return out;
        }
        let mut base = self.clone();
        let mut out = v.to_vec();
        let mut e = k;
        // A^k v = prod of A^(2^i) over set bits; the factors commute.
        while e > 0 {
            if e & 1 == 1 {
                out = base.mul_vec(&out);
            }
            e >>= 1;
            if e > 0 {
                base = base.matmul(&base);
            }
        }
        out
    }

    /// `max_j |sum_k A[j][k] - 1|`.
    pub fn row_sum_error(&self) -> f64 {
        self.rows()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn transition_matrix(op: &SamplingOperator) -> TransitionMatrix {
    TransitionMatrix::new(op)
}

/// The basis of an operator tabulated on a uniform grid, `Phi[i][k] = phi_k(x_i)`.
#[derive(Debug, Clone)]
pub struct GridEvaluator {
    lo: f64,
    hi: f64,
    size: usize,
    weights: Vec<f64>,
}

impl GridEvaluator {
    /// Tabulates `op` on the `n + 1` uniform points of `[0, op.domain_hi()]`.
    pub fn new(op: &SamplingOperator, n: usize) -> Self {
        let xs = op.eval_grid(n);
        let size = op.len();
        let mut weights = vec![0.0; xs.len() * size];
        weights
            .par_chunks_mut(size)
            .zip(xs.par_iter())
            .for_each(|(row, &x)| op.weights_into(x, row));
        Self {
            lo: 0.0,
            hi: op.domain_hi(),
            size,
            weights,
        }
    }

    pub fn points(&self) -> usize {
        self.weights.len() / self.size
    }

    pub fn xs(&self) -> Vec<f64> {
        crate::gridfn::uniform_points(self.lo, self.hi, self.points() - 1)
    }

    /// Grid values of `x -> sum_k phi_k(x) v_k`.
    pub fn eval(&self, node_values: &[f64]) -> GridFunction {
        let values = self
            .weights
            .chunks(self.size)
            .map(|row| row.iter().zip(node_values).map(|(w, v)| w * v).sum())
            .collect();
        GridFunction::new(self.lo, self.hi, values).expect("evaluator grid is valid")
    }
}

/// `T^m(f; ·)` on the `n + 1` uniform points of `[0, domain_hi]`.
pub fn apply_power(
    op: &SamplingOperator,
    f: &FunctionSpec,
    m: u64,
    n: usize,
) -> Result<GridFunction> {
    f.validate()?;
    if m == 0 {
        return sample_on(f, 0.0, op.domain_hi(), n);
    }
    apply_power_fn(op, |x| f.eval(x), m, n)
}

/// `T^m(f; ·)` for an arbitrary closure `f`.
pub fn apply_power_fn(
    op: &SamplingOperator,
    f: impl Fn(f64) -> f64,
    m: u64,
    n: usize,
) -> Result<GridFunction> {
    if n == 0 {
        return Err(Error::InvalidGrid("need at least one interval".into()));
    }
    if m == 0 {
        return GridFunction::from_fn(0.0, op.domain_hi(), n, f);
    }
    let a = TransitionMatrix::new(op);
    let fhat: Vec<f64> = op.nodes().iter().map(|&t| f(t)).collect();
    let v = a.power_apply(&fhat, m - 1);
    Ok(GridEvaluator::new(op, n).eval(&v))
}

/// `T^m(f; x)` at a single point.
pub fn power_at(op: &SamplingOperator, f: impl Fn(f64) -> f64, m: u64, x: f64) -> f64 {
    if m == 0 {
        return f(x);
    }
    let a = TransitionMatrix::new(op);
    let fhat: Vec<f64> = op.nodes().iter().map(|&t| f(t)).collect();
    op.apply_values(&a.power_apply(&fhat, m - 1), x)
}

/// Closed-form limit operators recognized from the limit moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LimitKind {
    /// `(1 - x) f(0) + x f(1)`.
    P,
    /// `(1 - x^2) f(0) + x^2 f(1)`.
    V,
    #[serde(rename = "eval0")]
    Eval0,
    #[serde(rename = "eval1")]
    Eval1,
    #[serde(rename = "general")]
    General,
}

impl LimitKind {
    /// `(T(e1; x), T(e2; x))` for the closed-form limits.
    pub fn moments_at(self, x: f64) -> Option<(f64, f64)> {
        match self {
            LimitKind::P => Some((x, x)),
            LimitKind::V => Some((x * x, x * x)),
            LimitKind::Eval0 => Some((0.0, 0.0)),
            LimitKind::Eval1 => Some((1.0, 1.0)),
            LimitKind::General => None,
        }
    }

    /// Applies the closed-form limit to `f` at `x`.
    pub fn apply(self, f: &FunctionSpec, x: f64) -> Option<f64> {
        match self {
            LimitKind::P => Some(eval_p(f, x)),
            LimitKind::V => Some(eval_v(f, x)),
            LimitKind::Eval0 => Some(f.eval(0.0)),
            LimitKind::Eval1 => Some(f.eval(1.0)),
            LimitKind::General => None,
        }
    }
}

impl fmt::Display for LimitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LimitKind::P => "P",
            LimitKind::V => "V",
            LimitKind::Eval0 => "eval0",
            LimitKind::Eval1 => "eval1",
            LimitKind::General => "general",
        })
    }
}

/// `P(f; x) = (1 - x) f(0) + x f(1)`.
pub fn eval_p(f: &FunctionSpec, x: f64) -> f64 {
    (1.0 - x) * f.eval(0.0) + x * f.eval(1.0)
}

/// `V(f; x) = (1 - x^2) f(0) + x^2 f(1)`.
pub fn eval_v(f: &FunctionSpec, x: f64) -> f64 {
    (1.0 - x * x) * f.eval(0.0) + x * x * f.eval(1.0)
}

/// Matches limit moments against the closed-form limits at [`CLASSIFY_TOL`].
pub fn classify_limit(limit_e1: &GridFunction, limit_e2: &GridFunction) -> Result<LimitKind> {
    if !limit_e1.same_grid(limit_e2) {
        return Err(Error::GridMismatch(
            "limit moments live on different grids".into(),
        ));
    }
    let candidates = [
        LimitKind::P,
        LimitKind::V,
        LimitKind::Eval0,
        LimitKind::Eval1,
    ];
    let kind = candidates.into_iter().find(|kind| {
        limit_e1
            .values()
            .iter()
            .zip(limit_e2.values())
            .enumerate()
            .all(|(i, (v1, v2))| {
                let (w1, w2) = kind.moments_at(limit_e1.x(i)).expect("closed form");
                (v1 - w1).abs() <= CLASSIFY_TOL && (v2 - w2).abs() <= CLASSIFY_TOL
            })
    });
    Ok(kind.unwrap_or(LimitKind::General))
}

/// The limit operator `T^∞` as seen through its moments.
#[derive(Debug, Clone, Serialize)]
pub struct LimitInfo {
    pub kind: LimitKind,
    pub limit_e1: GridFunction,
    pub limit_e2: GridFunction,
    /// Iteration count `m` whose moments were accepted as the limit.
    pub m_star: u64,
    /// Node sup-gap of the moments between the last two squarings.
    pub residual: f64,
    pub tol: f64,
    #[serde(skip)]
    limit_matrix: TransitionMatrix,
}

impl LimitInfo {
    /// `lim A^m`, so that `T^∞(f; x) = sum_k phi_k(x) (A^∞ f̂)_k`.
    pub fn limit_matrix(&self) -> &TransitionMatrix {
        &self.limit_matrix
    }

    /// `T^∞(f; ·)` on the evaluator's grid, using the closed form when classified.
    pub fn apply(
        &self,
        op: &SamplingOperator,
        eval: &GridEvaluator,
        f: &FunctionSpec,
    ) -> GridFunction {
        match self.kind {
            LimitKind::General => {
                let fhat: Vec<f64> = op.nodes().iter().map(|&t| f.eval(t)).collect();
                eval.eval(&self.limit_matrix.mul_vec(&fhat))
            }
            kind => {
                let xs = eval.xs();
                let values = xs
                    .iter()
                    .map(|&x| kind.apply(f, x).expect("closed form"))
                    .collect();
                GridFunction::new(0.0, op.domain_hi(), values).expect("grid")
            }
        }
    }

    /// Sup-distance of the numerical limit moments to the classified closed form.
    pub fn closed_form_distance(&self) -> Option<f64> {
        if self.kind == LimitKind::General {
            return None;
        }
        let d = self
            .limit_e1
            .values()
            .iter()
            .zip(self.limit_e2.values())
            .enumerate()
            .map(|(i, (v1, v2))| {
                let (w1, w2) = self
                    .kind
                    .moments_at(self.limit_e1.x(i))
                    .expect("closed form");
                (v1 - w1).abs().max((v2 - w2).abs())
            })
            .fold(0.0, f64::max);
        Some(d)
    }
}

/// Squares `A` until the moment vectors stop moving by more than `tol`.
pub fn converge_limit(op: &SamplingOperator, tol: f64, m_max: u64, n: usize) -> Result<LimitInfo> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tol must be positive, got {tol}"
        )));
    }
    let t1: Vec<f64> = op.nodes().to_vec();
    let t2: Vec<f64> = t1.iter().map(|t| t * t).collect();
    let mut power = TransitionMatrix::new(op);
    let mut exponent: u64 = 1;
    let mut v1 = power.mul_vec(&t1);
    let mut v2 = power.mul_vec(&t2);
    let mut residual = f64::INFINITY;
    loop {
        if exponent.saturating_mul(2).saturating_add(1) > m_max {
            return Err(Error::NotConverged {
                residual,
                tol,
                m_max,
            });
        }
        power = power.matmul(&power);
        exponent *= 2;
        let w1 = power.mul_vec(&t1);
        let w2 = power.mul_vec(&t2);
        residual = sup_gap(&v1, &w1).max(sup_gap(&v2, &w2));
        v1 = w1;
        v2 = w2;
        if residual <= tol {
            break;
        }
    }
    let eval = GridEvaluator::new(op, n);
    let limit_e1 = eval.eval(&v1);
    let limit_e2 = eval.eval(&v2);
    let kind = classify_limit(&limit_e1, &limit_e2)?;
    Ok(LimitInfo {
        kind,
        limit_e1,
        limit_e2,
        m_star: exponent + 1,
        residual,
        tol,
        limit_matrix: power,
    })
}

fn sup_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfn::{sample, sup_diff};
    use crate::operators::{
        classify_sign, make_bernstein, make_king, make_mkz_with, make_stancu, SignTag,
    };

    #[test]
    fn transition_matrix_examples() {
        let b1 = transition_matrix(&make_bernstein(1).unwrap());
        assert_eq!(b1.row(0), &[1.0, 0.0]);
        assert_eq!(b1.row(1), &[0.0, 1.0]);
        let b2 = transition_matrix(&make_bernstein(2).unwrap());
        let want = [[1.0, 0.0, 0.0], [0.25, 0.5, 0.25], [0.0, 0.0, 1.0]];
        for (j, row) in want.iter().enumerate() {
            for (k, w) in row.iter().enumerate() {
                assert!((b2.get(j, k) - w).abs() < 1e-15);
            }
        }
        let k2 = transition_matrix(&make_king(2).unwrap());
        assert_eq!(k2.row(2), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn power_zero_is_identity() {
        let op = make_king(3).unwrap();
        for f in [FunctionSpec::e(2), FunctionSpec::SinePi] {
            assert_eq!(
                apply_power(&op, &f, 0, 64).unwrap(),
                sample(&f, 64).unwrap()
            );
        }
    }

    #[test]
    fn bernstein_second_moment_recursion() {
        for n in [2usize, 5, 9] {
            let op = make_bernstein(n).unwrap();
            let a = 1.0 - 1.0 / n as f64;
            for m in 1..=12u64 {
                let g = apply_power(&op, &FunctionSpec::e(2), m, 128).unwrap();
                let am = a.powi(m as i32);
                let want = g.map_with_x(|x, _| am * x * x + (1.0 - am) * x);
                assert!(sup_diff(&g, &want).unwrap() <= 1e-12);
            }
        }
        let g = apply_power(&make_bernstein(5).unwrap(), &FunctionSpec::e(2), 3, 2).unwrap();
        assert!((g.values()[1] - 0.372).abs() < 1e-14);
    }

    #[test]
    fn squaring_agrees_with_repeated_products() {
        let op = make_king(4).unwrap();
        let a = transition_matrix(&op);
        let v: Vec<f64> = op.nodes().iter().map(|t| (3.0 * t).sin()).collect();
        let mut direct = v.clone();
        for _ in 0..200 {
            direct = a.mul_vec(&direct);
        }
        let fast = a.power_apply(&v, 200);
        assert!(sup_gap(&direct, &fast) < 1e-13);
    }

    #[test]
    fn semigroup_law() {
        let ops = [
            make_bernstein(4).unwrap(),
            make_king(3).unwrap(),
            make_stancu(4, 1.0, 1.0).unwrap(),
        ];
        for op in &ops {
            for (m1, m2) in [(1u64, 1u64), (2, 3), (5, 4)] {
                let f = FunctionSpec::SinePi;
                let whole = apply_power(op, &f, m1 + m2, 64).unwrap();
                let split =
                    apply_power_fn(op, |x| power_at(op, |t| f.eval(t), m1, x), m2, 64).unwrap();
                assert!(sup_diff(&whole, &split).unwrap() <= 1e-11);
            }
        }
    }

    #[test]
    fn powers_stay_stochastic() {
        let op = make_king(6).unwrap();
        let a = transition_matrix(&op);
        let mut p = a.clone();
        for m in 2..=64u32 {
            p = p.matmul(&a);
            assert!(p.row_sum_error() <= m as f64 * 1e-14);
            assert!(p.min_entry() >= -1e-14);
        }
    }

    #[test]
    fn fixed_points() {
        let ops = [
            make_bernstein(3).unwrap(),
            make_king(5).unwrap(),
            make_stancu(4, 0.0, 1.0).unwrap(),
        ];
        for op in &ops {
            for m in [1u64, 7, 30] {
                let g = apply_power(op, &FunctionSpec::e(0), m, 64).unwrap();
                assert!(g.values().iter().all(|v| (v - 1.0).abs() < 1e-13));
                if classify_sign(op).tag == SignTag::PreservesE1 {
                    let g = apply_power(op, &FunctionSpec::e(1), m, 64).unwrap();
                    let e1 = sample(&FunctionSpec::e(1), 64).unwrap();
                    assert!(sup_diff(&g, &e1).unwrap() <= (m as f64 + 1.0) * 1e-14);
                }
            }
        }
        let b1 = make_bernstein(1).unwrap();
        let once = apply_power(&b1, &FunctionSpec::Sqrt, 1, 64).unwrap();
        for m in 2..10 {
            assert!(
                sup_diff(
                    &once,
                    &apply_power(&b1, &FunctionSpec::Sqrt, m, 64).unwrap()
                )
                .unwrap()
                    < 1e-15
            );
        }
    }

    #[test]
    fn limit_examples() {
        let b = converge_limit(&make_bernstein(5).unwrap(), 1e-10, DEFAULT_M_MAX, 64).unwrap();
        assert_eq!(b.kind, LimitKind::P);
        assert!(b.residual <= 1e-10);
        assert!(b.closed_form_distance().unwrap() <= 1e-8);
        let k = converge_limit(&make_king(4).unwrap(), 1e-10, DEFAULT_M_MAX, 64).unwrap();
        assert_eq!(k.kind, LimitKind::V);
        let s =
            converge_limit(&make_stancu(4, 0.0, 1.0).unwrap(), 1e-10, DEFAULT_M_MAX, 64).unwrap();
        assert_eq!(s.kind, LimitKind::Eval0);
        let s =
            converge_limit(&make_stancu(4, 1.0, 1.0).unwrap(), 1e-10, DEFAULT_M_MAX, 64).unwrap();
        assert_eq!(s.kind, LimitKind::Eval1);
    }

    #[test]
    fn truncated_mkz_drains_to_zero() {
        let op = make_mkz_with(2, 1e-10, 0.9, 5000).unwrap();
        let lim = converge_limit(&op, 1e-10, DEFAULT_M_MAX, 64).unwrap();
        assert_eq!(
            lim.kind,
            LimitKind::Eval0,
            "{:?}",
            lim.closed_form_distance()
        );
    }

    #[test]
    fn limit_reports_non_convergence() {
        let err = converge_limit(&make_bernstein(50).unwrap(), 1e-10, 64, 64).unwrap_err();
        assert!(matches!(err, Error::NotConverged { .. }));
        assert!(converge_limit(&make_bernstein(5).unwrap(), 0.0, 64, 64).is_err());
    }

    #[test]
    fn classify_limit_table() {
        let e1 = sample(&FunctionSpec::e(1), 32).unwrap();
        let e2 = sample(&FunctionSpec::e(2), 32).unwrap();
        let zero = e1.map_with_x(|_, _| 0.0);
        let one = e1.map_with_x(|_, _| 1.0);
        assert_eq!(classify_limit(&e1, &e1).unwrap(), LimitKind::P);
        assert_eq!(classify_limit(&e2, &e2).unwrap(), LimitKind::V);
        assert_eq!(classify_limit(&zero, &zero).unwrap(), LimitKind::Eval0);
        assert_eq!(classify_limit(&one, &one).unwrap(), LimitKind::Eval1);
        let half = e1.map_with_x(|x, _| 0.5 * x);
        assert_eq!(classify_limit(&half, &e1).unwrap(), LimitKind::General);
        assert!(classify_limit(&e1, &sample(&FunctionSpec::e(1), 16).unwrap()).is_err());
    }

    #[test]
    fn p_and_v() {
        assert_eq!(eval_p(&FunctionSpec::e(2), 0.5), 0.5);
        assert_eq!(eval_v(&FunctionSpec::e(1), 0.5), 0.25);
        for x in [0.0, 0.3, 1.0] {
            assert_eq!(eval_p(&FunctionSpec::e(0), x), 1.0);
            assert_eq!(eval_v(&FunctionSpec::e(0), x), 1.0);
        }
    }
}
