//! Finite-rank positive operators `T(f; x) = sum_k phi_k(x) f(t_k)`.
//!
//! Operators keep their basis in analytic form so `T^m(f; x)` can be
//! evaluated at arbitrary `x`; only the node values are iterated.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gridfn::{uniform_points, GridFunction, DEFAULT_GRID};

/// Tolerance used when classifying `T(e1) - e1` and testing `T(e2) = e2`.
pub const SIGN_TOL: f64 = 1e-10;

/// Default upper end of the evaluation grid for MKZ operators.
pub const MKZ_DEFAULT_X_MAX: f64 = 0.95;

/// Largest `n + K` for which MKZ coefficients are generated.
pub const MKZ_MAX_INDEX: usize = 10_000;

const ROW_SUM_TOL: f64 = 1e-9;

/// Constructor parameters of an operator.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum OperatorKind {
    Bernstein {
        n: usize,
    },
    Stancu {
        n: usize,
        alpha: f64,
        beta: f64,
    },
    King {
        n: usize,
    },
    Mkz {
        n: usize,
        tail_tol: f64,
        x_max: f64,
        terms: usize,
    },
    Matrix {
        size: usize,
    },
}

#[derive(Debug, Clone)]
enum Basis {
    /// Bernstein basis in the variable `x`.
    Binomial { ln_binom: Vec<f64> },
    /// Bernstein basis in the variable `r(x)` with `(n-1) r^2 + r = n x^2`.
    King { ln_binom: Vec<f64> },
    /// Truncated MKZ basis `C(n+k, k) x^k`, normalized over `k <= K`.
    Mkz { ln_coef: Vec<f64> },
    /// Rows of a transition matrix, interpolated linearly between nodes.
    Tabulated { rows: Vec<Vec<f64>> },
}

/// A positive linear operator on `C[0, 1]` sampling `f` at finitely many nodes.
#[derive(Debug, Clone)]
pub struct SamplingOperator {
    kind: OperatorKind,
    name: String,
    nodes: Vec<f64>,
    basis: Basis,
    domain_hi: f64,
}

impl SamplingOperator {
    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Right end of the grid on which this operator is evaluated (1 except for MKZ).
    pub fn domain_hi(&self) -> f64 {
        self.domain_hi
    }

    /// The `N + 1` uniform evaluation points of `[0, domain_hi]`.
    pub fn eval_grid(&self, n: usize) -> Vec<f64> {
        uniform_points(0.0, self.domain_hi, n)
    }

    /// Writes `phi_k(x)` for all `k` into `out`.
    pub fn weights_into(&self, x: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.nodes.len());
        let x = x.clamp(0.0, 1.0);
        match &self.basis {
            Basis::Binomial { ln_binom } => binomial_weights(ln_binom, x, out),
            Basis::King { ln_binom } => {
                let n = (ln_binom.len() - 1) as f64;
                binomial_weights(ln_binom, king_r(n, x), out)
            }
            Basis::Mkz { ln_coef } => mkz_weights(ln_coef, x, out),
            Basis::Tabulated { rows } => {
                let nodes = &self.nodes;
                let last = nodes.len() - 1;
                if x <= nodes[0] {
                    out.copy_from_slice(&rows[0]);
                } else if x >= nodes[last] {
                    out.copy_from_slice(&rows[last]);
                } else {
                    let j = nodes.partition_point(|&t| t <= x) - 1;
                    let w = (x - nodes[j]) / (nodes[j + 1] - nodes[j]);
                    for (k, o) in out.iter_mut().enumerate() {
                        *o = (1.0 - w) * rows[j][k] + w * rows[j + 1][k];
                    }
                }
            }
        }
    }

    pub fn weights(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes.len()];
        self.weights_into(x, &mut out);
        out
    }

    /// `T(f; x)` for a function given by its values at the nodes.
    pub fn apply_values(&self, node_values: &[f64], x: f64) -> f64 {
        self.weights(x)
            .iter()
            .zip(node_values)
            .map(|(w, v)| w * v)
            .sum()
    }

    /// `T(f; x)`.
    pub fn apply(&self, f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let values: Vec<f64> = self.nodes.iter().map(|&t| f(t)).collect();
        self.apply_values(&values, x)
    }

    /// Uniform grid on `[0, 1]` plus the nodes, sorted.
    pub fn probe_points(&self) -> Vec<f64> {
        let mut pts = uniform_points(0.0, 1.0, DEFAULT_GRID);
        pts.extend_from_slice(&self.nodes);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// `(max, min)` of `T(e_i; x) - x^i` over the probe points.
    pub fn moment_deviation(&self, i: u32) -> (f64, f64) {
        let node_pows: Vec<f64> = self.nodes.iter().map(|t| t.powi(i as i32)).collect();
        self.probe_points()
            .into_iter()
            .map(|x| self.apply_values(&node_pows, x) - x.powi(i as i32))
            .fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), d| {
                (hi.max(d), lo.min(d))
            })
    }

    /// Whether `T(e2) = e2` holds on the probe points within [`SIGN_TOL`].
    pub fn preserves_e2(&self) -> bool {
        let (hi, lo) = self.moment_deviation(2);
        hi.abs().max(lo.abs()) <= SIGN_TOL
    }
}

impl fmt::Display for SamplingOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

fn ln_binomials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 0..n {
        acc += (((n - k) as f64) / ((k + 1) as f64)).ln();
        out.push(acc);
    }
    out
}

fn binomial_weights(ln_binom: &[f64], p: f64, out: &mut [f64]) {
    let n = ln_binom.len() - 1;
    if p <= 0.0 {
        out.fill(0.0);
        out[0] = 1.0;
        return;
    }
    if p >= 1.0 {
        out.fill(0.0);
        out[n] = 1.0;
        return;
    }
    let lp = p.ln();
    let lq = (-p).ln_1p();
    for (k, o) in out.iter_mut().enumerate() {
        *o = (ln_binom[k] + k as f64 * lp + (n - k) as f64 * lq).exp();
    }
}

/// Solution `r in [0, 1]` of `(n - 1) r^2 + r = n x^2`.
pub fn king_r(n: f64, x: f64) -> f64 {
    2.0 * n * x * x / (1.0 + (1.0 + 4.0 * n * (n - 1.0) * x * x).sqrt())
}

fn mkz_weights(ln_coef: &[f64], x: f64, out: &mut [f64]) {
    if x <= 0.0 {
        out.fill(0.0);
        out[0] = 1.0;
        return;
    }
    let lx = x.ln();
    let mut top = f64::NEG_INFINITY;
    for (k, o) in out.iter_mut().enumerate() {
        *o = ln_coef[k] + k as f64 * lx;
        top = top.max(*o);
    }
    let mut sum = 0.0;
    for o in out.iter_mut() {
        *o = (*o - top).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Bernstein operator `B_n`: nodes `k/n`, basis `C(n,k) x^k (1-x)^(n-k)`.
pub fn make_bernstein(n: usize) -> Result<SamplingOperator> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "Bernstein degree must be >= 1".into(),
        ));
    }
    Ok(SamplingOperator {
        kind: OperatorKind::Bernstein { n },
        name: format!("bernstein:{n}"),
        nodes: uniform_points(0.0, 1.0, n),
        basis: Basis::Binomial {
            ln_binom: ln_binomials(n),
        },
        domain_hi: 1.0,
    })
}

/// Stancu operator: Bernstein basis with nodes `(k + alpha) / (n + beta)`.
pub fn make_stancu(n: usize, alpha: f64, beta: f64) -> Result<SamplingOperator> {
    if n == 0 {
        return Err(Error::InvalidParameter("Stancu degree must be >= 1".into()));
    }
    if !(alpha >= 0.0 && alpha <= beta && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "Stancu parameters need 0 <= alpha <= beta, got alpha = {alpha}, beta = {beta}"
        )));
    }
    let denom = n as f64 + beta;
    Ok(SamplingOperator {
        kind: OperatorKind::Stancu { n, alpha, beta },
        name: format!("stancu:{n}:{alpha}:{beta}"),
        nodes: (0..=n).map(|k| (k as f64 + alpha) / denom).collect(),
        basis: Basis::Binomial {
            ln_binom: ln_binomials(n),
        },
        domain_hi: 1.0,
    })
}

/// King operator preserving `e0` and `e2`.
pub fn make_king(n: usize) -> Result<SamplingOperator> {
    if n < 2 {
        return Err(Error::InvalidParameter("King operator needs n >= 2".into()));
    }
    Ok(SamplingOperator {
        kind: OperatorKind::King { n },
        name: format!("king:{n}"),
        nodes: uniform_points(0.0, 1.0, n),
        basis: Basis::King {
            ln_binom: ln_binomials(n),
        },
        domain_hi: 1.0,
    })
}

/// Truncated Meyer-König–Zeller operator evaluated on `[0, 0.95]`.
pub fn make_mkz(n: usize, tail_tol: f64) -> Result<SamplingOperator> {
    make_mkz_with(
        n,
        tail_tol,
        MKZ_DEFAULT_X_MAX,
        MKZ_MAX_INDEX.saturating_sub(n),
    )
}

/// Truncated MKZ operator.
///
/// The series `sum_k f(k/(k+n)) C(n+k,k) x^k (1-x)^(n+1)` is cut at the
/// smallest `K <= k_max` whose tail weight at `x_max` is below `tail_tol`.
/// The kept weights are renormalized, so `T(e0) = e0` on all of `[0, 1]`
/// and `T(e1) <= e1` with a deficit bounded by the tail weight.
pub fn make_mkz_with(
    n: usize,
    tail_tol: f64,
    x_max: f64,
    k_max: usize,
) -> Result<SamplingOperator> {
    if n == 0 {
        return Err(Error::InvalidParameter("MKZ index must be >= 1".into()));
    }
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "MKZ tail tolerance must lie in (0, 1), got {tail_tol}"
        )));
    }
    if !(x_max > 0.0 && x_max < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "MKZ x_max must lie in (0, 1), got {x_max}"
        )));
    }
    let k = mkz_truncation(n, tail_tol, x_max, k_max)?;
    let mut ln_coef = Vec::with_capacity(k + 1);
    let mut acc = 0.0;
    for j in 0..=k {
        ln_coef.push(acc);
        acc += (((n + j + 1) as f64) / ((j + 1) as f64)).ln();
    }
    Ok(SamplingOperator {
        kind: OperatorKind::Mkz {
            n,
            tail_tol,
            x_max,
            terms: k + 1,
        },
        name: format!("mkz:{n}:{tail_tol}:{x_max}"),
        nodes: (0..=k).map(|j| j as f64 / (j + n) as f64).collect(),
        basis: Basis::Mkz { ln_coef },
        domain_hi: x_max,
    })
}

/// Smallest `K` with `sum_{k > K} C(n+k,k) x^k (1-x)^(n+1) <= tail_tol` at `x = x_max`.
fn mkz_truncation(n: usize, tail_tol: f64, x: f64, k_max: usize) -> Result<usize> {
    let lx = x.ln();
    let lq = (n + 1) as f64 * (-x).ln_1p();
    let cap = 4 * k_max + 1000;
    let mut terms = Vec::new();
    let mut ln_c = 0.0;
    let mut remainder = 0.0;
    for j in 0..=cap {
        let w = (ln_c + j as f64 * lx + lq).exp();
        terms.push(w);
        let ratio = x * (n + j + 1) as f64 / (j + 1) as f64;
        if ratio < 1.0 && w * ratio / (1.0 - ratio) < tail_tol * 1e-6 {
            remainder = w * ratio / (1.0 - ratio);
            break;
        }
        ln_c += (((n + j + 1) as f64) / ((j + 1) as f64)).ln();
    }
    // tails[K] = weight strictly beyond K
    let mut tail = remainder;
    let mut tails = vec![0.0; terms.len()];
    for j in (0..terms.len()).rev() {
        tails[j] = tail;
        tail += terms[j];
    }
    match tails.iter().position(|&t| t <= tail_tol) {
        Some(k) if k <= k_max => Ok(k),
        _ => Err(Error::TruncationExceeded {
            tail: tails.get(k_max).copied().unwrap_or(tail),
            tail_tol,
            x_max: x,
            k_max,
        }),
    }
}

/// Operator defined by nodes and a row-stochastic matrix `A[j][k] = phi_k(t_j)`.
///
/// Between nodes the basis is interpolated linearly; outside it is constant.
/// Rows whose sums are within `1e-9` of one are renormalized.
pub fn make_matrix(nodes: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<SamplingOperator> {
    let size = nodes.len();
    if size == 0 {
        return Err(Error::InvalidOperator(
            "matrix operator needs at least one node".into(),
        ));
    }
    if nodes.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::InvalidOperator("nodes must lie in [0, 1]".into()));
    }
    if nodes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidOperator(
            "nodes must be strictly increasing".into(),
        ));
    }
    if rows.len() != size {
        return Err(Error::InvalidOperator(format!(
            "expected {size} matrix rows, found {}",
            rows.len()
        )));
    }
    let mut normalized = Vec::with_capacity(size);
    for (j, row) in rows.into_iter().enumerate() {
        if row.len() != size {
            return Err(Error::InvalidOperator(format!(
                "row {j} has {} entries, expected {size}",
                row.len()
            )));
        }
        if let Some(k) = row.iter().position(|&a| !(a >= -1e-14)) {
            return Err(Error::InvalidOperator(format!(
                "positivity violated: entry ({j}, {k}) = {}",
                row[k]
            )));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::InvalidOperator(format!(
                "row-sum invariant violated: row {j} sums to {sum}"
            )));
        }
        normalized.push(row.iter().map(|a| a.max(0.0) / sum).collect());
    }
    Ok(SamplingOperator {
        kind: OperatorKind::Matrix { size },
        name: format!("matrix[{size}]"),
        nodes,
        basis: Basis::Tabulated { rows: normalized },
        domain_hi: 1.0,
    })
}

/// Parses the CSV matrix format: first row nodes, then one row of `A` per node.
pub fn parse_matrix_csv(text: &str) -> Result<SamplingOperator> {
    let mut rows = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| {
                cell.trim().parse::<f64>().map_err(|_| Error::Parse {
                    input: line.to_string(),
                    position: line_no + 1,
                    reason: format!("`{}` is not a number", cell.trim()),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidOperator("empty matrix file".into()));
    }
    let nodes = rows.remove(0);
    make_matrix(nodes, rows)
}

pub fn load_matrix(path: &Path) -> Result<SamplingOperator> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_matrix_csv(&text)
}

/// Grid function `x -> T(e_i; x)` on the `N + 1` points of `[0, domain_hi]`.
pub fn moments(op: &SamplingOperator, i: u32, n: usize) -> Result<GridFunction> {
    if i > 2 {
        return Err(Error::InvalidParameter(format!(
            "moment index must be 0, 1 or 2, got {i}"
        )));
    }
    let node_pows: Vec<f64> = op.nodes.iter().map(|t| t.powi(i as i32)).collect();
    GridFunction::from_fn(0.0, op.domain_hi, n, |x| op.apply_values(&node_pows, x))
}

/// Sign of `T(e1) - e1` on the probe grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignTag {
    PreservesE1,
    LeqE1,
    GeqE1,
    Mixed,
}

impl fmt::Display for SignTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SignTag::PreservesE1 => "preserves_e1",
            SignTag::LeqE1 => "leq_e1",
            SignTag::GeqE1 => "geq_e1",
            SignTag::Mixed => "mixed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignClass {
    pub tag: SignTag,
    /// Probe point closest to a sign change of `T(e1) - e1` (mixed only).
    pub witness: Option<f64>,
    /// `sup (T(e1;x) - x)` over the probe grid.
    pub max_excess: f64,
    /// `inf (T(e1;x) - x)` over the probe grid.
    pub min_excess: f64,
}

impl SignClass {
    /// Whether `T(e1) <= e1` holds (including exact preservation).
    pub fn is_leq(&self) -> bool {
        matches!(self.tag, SignTag::PreservesE1 | SignTag::LeqE1)
    }

    pub fn is_geq(&self) -> bool {
        matches!(self.tag, SignTag::PreservesE1 | SignTag::GeqE1)
    }
}

pub fn classify_sign(op: &SamplingOperator) -> SignClass {
    let node_t: Vec<f64> = op.nodes.clone();
    let probes = op.probe_points();
    let diffs: Vec<f64> = probes
        .iter()
        .map(|&x| op.apply_values(&node_t, x) - x)
        .collect();
    let max_excess = diffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_excess = diffs.iter().copied().fold(f64::INFINITY, f64::min);
    let tag = if max_excess <= SIGN_TOL && min_excess >= -SIGN_TOL {
        SignTag::PreservesE1
    } else if max_excess <= SIGN_TOL {
        SignTag::LeqE1
    } else if min_excess >= -SIGN_TOL {
        SignTag::GeqE1
    } else {
        SignTag::Mixed
    };
    let witness = (tag == SignTag::Mixed).then(|| {
        let mut last: Option<usize> = None;
        for (i, &d) in diffs.iter().enumerate() {
            if d.abs() <= SIGN_TOL {
                continue;
            }
            if let Some(j) = last {
                if diffs[j].signum() != d.signum() {
                    // zero crossing between probes j and i
                    let best = (j..=i)
                        .min_by(|&a, &b| diffs[a].abs().total_cmp(&diffs[b].abs()))
                        .unwrap_or(i);
                    return probes[best];
                }
            }
            last = Some(i);
        }
        probes[0]
    });
    SignClass {
        tag,
        witness,
        max_excess,
        min_excess,
    }
}

/// Parsed operator constructor string.
#[derive(Debug, Clone, PartialEq)]
pub enum OperatorSpec {
    Bernstein(usize),
    Stancu(usize, f64, f64),
    King(usize),
    Mkz {
        n: usize,
        tail_tol: f64,
        x_max: Option<f64>,
    },
    Matrix(String),
}

impl OperatorSpec {
    pub fn build(&self) -> Result<SamplingOperator> {
        match self {
            OperatorSpec::Bernstein(n) => make_bernstein(*n),
            OperatorSpec::Stancu(n, a, b) => make_stancu(*n, *a, *b),
            OperatorSpec::King(n) => make_king(*n),
            OperatorSpec::Mkz { n, tail_tol, x_max } => make_mkz_with(
                *n,
                *tail_tol,
                x_max.unwrap_or(MKZ_DEFAULT_X_MAX),
                MKZ_MAX_INDEX.saturating_sub(*n),
            ),
            OperatorSpec::Matrix(path) => load_matrix(Path::new(path)),
        }
    }
}

impl FromStr for OperatorSpec {
    type Err = Error;

    /// Grammar: `bernstein:n | stancu:n:alpha:beta | king:n | mkz:n:tol[:x_max] | matrix:<path>`.
    fn from_str(s: &str) -> Result<Self> {
        let err = |position: usize, reason: String| Error::Parse {
            input: s.to_string(),
            position,
            reason,
        };
        let (head, rest) = s
            .split_once(':')
            .ok_or_else(|| err(s.len(), "expected `<family>:<params>`".to_string()))?;
        if head == "matrix" {
            if rest.is_empty() {
                return Err(err(s.len(), "matrix needs a file path".into()));
            }
            return Ok(OperatorSpec::Matrix(rest.to_string()));
        }
        // (offset, text) of each parameter field
        let mut fields = Vec::new();
        let mut offset = head.len() + 1;
        for part in rest.split(':') {
            fields.push((offset, part));
            offset += part.len() + 1;
        }
        let int = |i: usize| -> Result<usize> {
            let (pos, raw) = fields[i];
            raw.parse::<usize>()
                .map_err(|_| err(pos, format!("`{raw}` is not a nonnegative integer")))
        };
        let real = |i: usize| -> Result<f64> {
            let (pos, raw) = fields[i];
            raw.parse::<f64>()
                .map_err(|_| err(pos, format!("`{raw}` is not a number")))
        };
        let arity = |expected: &[usize]| -> Result<()> {
            if expected.contains(&fields.len()) {
                Ok(())
            } else {
                Err(err(
                    head.len() + 1,
                    format!(
                        "`{head}` takes {expected:?} parameters, got {}",
                        fields.len()
                    ),
                ))
            }
        };
        match head {
            "bernstein" => {
                arity(&[1])?;
                Ok(OperatorSpec::Bernstein(int(0)?))
            }
            "stancu" => {
                arity(&[3])?;
                Ok(OperatorSpec::Stancu(int(0)?, real(1)?, real(2)?))
            }
            "king" => {
                arity(&[1])?;
                Ok(OperatorSpec::King(int(0)?))
            }
            "mkz" => {
                arity(&[2, 3])?;
                Ok(OperatorSpec::Mkz {
                    n: int(0)?,
                    tail_tol: real(1)?,
                    x_max: if fields.len() == 3 {
                        Some(real(2)?)
                    } else {
                        None
                    },
                })
            }
            _ => Err(err(0, format!("unknown operator family `{head}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfn::sup_diff;
    use proptest::prelude::*;

    fn catalog() -> Vec<SamplingOperator> {
        vec![
            make_bernstein(1).unwrap(),
            make_bernstein(5).unwrap(),
            make_bernstein(40).unwrap(),
            make_stancu(4, 0.0, 1.0).unwrap(),
            make_stancu(4, 1.0, 1.0).unwrap(),
            make_stancu(4, 1.0, 2.0).unwrap(),
            make_king(2).unwrap(),
            make_king(10).unwrap(),
            make_mkz_with(2, 1e-10, 0.9, 2000).unwrap(),
        ]
    }

    #[test]
    fn bernstein_one_is_endpoint_interpolation() {
        let b = make_bernstein(1).unwrap();
        for &x in &[0.0, 0.2, 0.7, 1.0] {
            let w = b.weights(x);
            assert!((w[0] - (1.0 - x)).abs() < 1e-15 && (w[1] - x).abs() < 1e-15);
        }
        assert!(make_bernstein(0).is_err());
    }

    #[test]
    fn bernstein_two_rows_at_nodes() {
        let b = make_bernstein(2).unwrap();
        let expected = [[1.0, 0.0, 0.0], [0.25, 0.5, 0.25], [0.0, 0.0, 1.0]];
        for (t, row) in b.nodes().iter().zip(expected) {
            for (w, e) in b.weights(*t).iter().zip(row) {
                assert!((w - e).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn bernstein_second_moment() {
        let b = make_bernstein(5).unwrap();
        let m2 = moments(&b, 2, 100).unwrap();
        let gap = m2.map_with_x(|x, v| v - x * x);
        let max = gap.values().iter().copied().fold(f64::MIN, f64::max);
        assert!((max - 0.05).abs() < 1e-14);
        assert!((gap.values()[50] - 0.05).abs() < 1e-14);
        for n in [1, 2, 5, 17, 60] {
            let b = make_bernstein(n).unwrap();
            let a = 1.0 - 1.0 / n as f64;
            let m2 = moments(&b, 2, 256).unwrap();
            let want = m2.map_with_x(|x, _| a * x * x + (1.0 - a) * x);
            assert!(sup_diff(&m2, &want).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn stancu_first_moment_and_sign() {
        let s = make_stancu(4, 0.0, 0.0).unwrap();
        let b = make_bernstein(4).unwrap();
        assert_eq!(s.nodes(), b.nodes());
        let s01 = make_stancu(4, 0.0, 1.0).unwrap();
        let m1 = moments(&s01, 1, 64).unwrap();
        assert!(m1
            .values()
            .iter()
            .enumerate()
            .all(|(i, v)| (v - 0.8 * m1.x(i)).abs() < 1e-14));
        assert_eq!(classify_sign(&s01).tag, SignTag::LeqE1);
        let s11 = make_stancu(4, 1.0, 1.0).unwrap();
        let m1 = moments(&s11, 1, 64).unwrap();
        assert!(m1
            .values()
            .iter()
            .enumerate()
            .all(|(i, v)| (v - (4.0 * m1.x(i) + 1.0) / 5.0).abs() < 1e-14));
        assert_eq!(classify_sign(&s11).tag, SignTag::GeqE1);
        let mixed = classify_sign(&make_stancu(4, 1.0, 2.0).unwrap());
        assert_eq!(mixed.tag, SignTag::Mixed);
        assert!((mixed.witness.unwrap() - 0.5).abs() < 2e-3);
        assert!(make_stancu(4, -0.1, 1.0).is_err());
        assert!(make_stancu(4, 2.0, 1.0).is_err());
    }

    #[test]
    fn king_basics() {
        for n in 2..=20 {
            let k = make_king(n).unwrap();
            assert_eq!(king_r(n as f64, 0.0), 0.0);
            assert!((king_r(n as f64, 1.0) - 1.0).abs() < 1e-15);
            let m2 = moments(&k, 2, 512).unwrap();
            let e2 = m2.map_with_x(|x, _| x * x);
            assert!(sup_diff(&m2, &e2).unwrap() <= 1e-10, "n = {n}");
            assert!(k.preserves_e2());
        }
        let k2 = make_king(2).unwrap();
        let r = (3f64.sqrt() - 1.0) / 2.0;
        assert!((king_r(2.0, 0.5) - r).abs() < 1e-15);
        let m1 = moments(&k2, 1, 2).unwrap();
        assert!((m1.values()[1] - 0.366025403784).abs() < 1e-11);
        assert_eq!(classify_sign(&make_king(4).unwrap()).tag, SignTag::LeqE1);
        assert!(make_king(1).is_err());
    }

    #[test]
    fn mkz_truncation_matches_untruncated_oracle() {
        let op = make_mkz_with(2, 1e-10, 0.9, 5000).unwrap();
        let OperatorKind::Mkz { terms, .. } = *op.kind() else {
            unreachable!()
        };
        // oracle: untruncated series with twice as many terms, no renormalization
        let oracle = |x: f64| -> (f64, f64) {
            let mut s0 = 0.0;
            let mut s1 = 0.0;
            let mut c: f64 = 1.0;
            for k in 0..2 * terms {
                let w = c * x.powi(k as i32) * (1.0 - x).powi(3);
                s0 += w;
                s1 += w * k as f64 / (k + 2) as f64;
                c *= (k + 3) as f64 / (k + 1) as f64;
            }
            (s0, s1)
        };
        let m1 = moments(&op, 1, 900).unwrap();
        assert_eq!(m1.hi(), 0.9);
        for (i, v) in m1.values().iter().enumerate() {
            let x = m1.x(i);
            let (s0, s1) = oracle(x);
            assert!((s0 - 1.0).abs() < 1e-9);
            assert!((s1 - x).abs() < 1e-12);
            assert!((v - x).abs() <= 1e-8, "x = {x}: {v}");
        }
        let m0 = moments(&op, 0, 900).unwrap();
        assert!(m0.values().iter().all(|v| (v - 1.0).abs() < 1e-13));
        assert_eq!(op.weights(0.0)[0], 1.0);
        // renormalized truncation pushes mass down, so T(e1) <= e1 overall
        assert!(classify_sign(&op).is_leq());
    }

    #[test]
    fn mkz_rejects_unreachable_tail() {
        assert!(matches!(
            make_mkz_with(2, 1e-12, 0.999, 100),
            Err(Error::TruncationExceeded { .. })
        ));
        assert!(make_mkz(2, 0.0).is_err());
        assert!(make_mkz(0, 1e-8).is_err());
    }

    #[test]
    fn bernstein_preserves_e1() {
        for n in [1, 3, 10] {
            assert_eq!(
                classify_sign(&make_bernstein(n).unwrap()).tag,
                SignTag::PreservesE1
            );
            let m1 = moments(&make_bernstein(n).unwrap(), 1, 64).unwrap();
            let e1 = m1.map_with_x(|x, _| x);
            assert!(sup_diff(&m1, &e1).unwrap() < 1e-14);
        }
    }

    #[test]
    fn matrix_operator_from_csv() {
        let op = parse_matrix_csv("0,0.5,1\n1,0,0\n0.25,0.5,0.25\n0,0,1\n").unwrap();
        let b2 = make_bernstein(2).unwrap();
        for t in op.nodes() {
            for (a, b) in op.weights(*t).iter().zip(b2.weights(*t)) {
                assert!((a - b).abs() < 1e-15);
            }
        }
        let bad = parse_matrix_csv("0,1\n0.5,0.4\n0,1\n").unwrap_err();
        assert!(bad.to_string().contains("row-sum"), "{bad}");
        assert!(parse_matrix_csv("0,1\n1,0\n").is_err());
        assert!(parse_matrix_csv("0,1\n1,x\n0,1\n").is_err());
        assert!(parse_matrix_csv("0,1\n1.5,-0.5\n0,1\n").is_err());
    }

    #[test]
    fn parses_operator_strings() {
        assert_eq!(
            "bernstein:5".parse::<OperatorSpec>().unwrap(),
            OperatorSpec::Bernstein(5)
        );
        assert_eq!(
            "stancu:4:1:2".parse::<OperatorSpec>().unwrap(),
            OperatorSpec::Stancu(4, 1.0, 2.0)
        );
        assert_eq!(
            "mkz:2:1e-10".parse::<OperatorSpec>().unwrap(),
            OperatorSpec::Mkz {
                n: 2,
                tail_tol: 1e-10,
                x_max: None
            }
        );
        assert_eq!(
            "mkz:2:1e-10:0.9".parse::<OperatorSpec>().unwrap(),
            OperatorSpec::Mkz {
                n: 2,
                tail_tol: 1e-10,
                x_max: Some(0.9)
            }
        );
        match "stancu:4:x:2".parse::<OperatorSpec>() {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 9),
            other => panic!("{other:?}"),
        }
        assert!("bernstein".parse::<OperatorSpec>().is_err());
        assert!("bernstein:1:2".parse::<OperatorSpec>().is_err());
        assert!("lagrange:3".parse::<OperatorSpec>().is_err());
        assert!("bernstein:0"
            .parse::<OperatorSpec>()
            .unwrap()
            .build()
            .is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn partition_of_unity_and_positivity(idx in 0usize..9, x in 0.0..=1.0f64) {
            let ops = catalog();
            let w = ops[idx].weights(x);
            let sum: f64 = w.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            prop_assert!(w.iter().all(|&v| v >= -1e-14));
            prop_assert!(ops[idx].nodes().iter().all(|t| (0.0..=1.0).contains(t)));
        }

        #[test]
        fn monotone_action(
            idx in 0usize..9,
            seed in proptest::collection::vec(-1.0..1.0f64, 64),
            bump in proptest::collection::vec(0.0..1.0f64, 64),
            x in 0.0..=1.0f64,
        ) {
            let ops = catalog();
            let op = &ops[idx];
            let f: Vec<f64> = (0..op.len()).map(|k| seed[k % 64]).collect();
            let g: Vec<f64> = (0..op.len()).map(|k| seed[k % 64] + bump[k % 64]).collect();
            prop_assert!(op.apply_values(&f, x) <= op.apply_values(&g, x) + 1e-12);
        }
    }
}
