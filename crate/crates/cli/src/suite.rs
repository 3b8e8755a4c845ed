//! The full check matrix behind `korovkin suite`.

use std::fs;
use std::io::Write;
use std::path::Path;

use korovkin_core::bounds::{cauchy_gap, moment_envelope, monotone_iterates, Analysis};
use korovkin_core::operators::{
    make_bernstein, make_king, make_mkz_with, make_stancu, MKZ_MAX_INDEX,
};
use korovkin_core::smoothness::{best_linear, check_zhuk_bounds_with, omega, Moduli};
use korovkin_core::{FunctionSpec, LimitKind, Result as CoreResult, SamplingOperator, SignTag};
use rayon::prelude::*;

use crate::args::ExperimentConfig;
use crate::output::num;
use crate::CliError;

pub const FUNCTIONS: [&str; 7] = ["e0", "e1", "e2", "e3", "abs_shift:0.5", "sine_pi", "sqrt"];
pub const ZHUK_FUNCTIONS: [&str; 3] = ["e2", "abs_shift:0.5", "sine_pi"];
pub const ZHUK_H: [f64; 3] = [0.05, 0.1, 0.2];
pub const ZHUK_L: usize = 400;
pub const ZHUK_SLACK: f64 = 0.05;

pub fn catalog() -> CoreResult<Vec<SamplingOperator>> {
    Ok(vec![
        make_bernstein(2)?,
        make_bernstein(5)?,
        make_bernstein(10)?,
        make_stancu(4, 0.0, 1.0)?,
        make_stancu(4, 1.0, 1.0)?,
        make_king(2)?,
        make_king(4)?,
        make_king(10)?,
        make_mkz_with(2, 1e-10, 0.9, MKZ_MAX_INDEX)?,
    ])
}

fn functions(names: &[&str]) -> Vec<FunctionSpec> {
    names
        .iter()
        .map(|s| s.parse().expect("catalog name"))
        .collect()
}

/// One CSV file worth of rows plus its pass count.
struct Family {
    name: &'static str,
    header: Vec<&'static str>,
    rows: Vec<(Vec<String>, bool)>,
}

impl Family {
    fn new(name: &'static str, header: &[&'static str]) -> Self {
        Self {
            name,
            header: header.iter().copied().chain(["pass"]).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, mut row: Vec<String>, pass: bool) {
        row.push(pass.to_string());
        self.rows.push((row, pass));
    }

    fn failures(&self) -> usize {
        self.rows.iter().filter(|(_, p)| !p).count()
    }

    fn write(&self, dir: &Path) -> std::result::Result<(), CliError> {
        let mut w = csv::Writer::from_path(dir.join(format!("{}.csv", self.name)))?;
        w.write_record(&self.header)?;
        for (row, _) in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn run(
    cfg: &ExperimentConfig,
    dir: &Path,
    log: &mut dyn Write,
) -> std::result::Result<bool, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let ops = catalog()?;
    let analyses: Vec<Analysis> = ops
        .par_iter()
        .map(|op| Analysis::new(op, cfg.verify_config()))
        .collect::<CoreResult<_>>()?;

    let families = vec![
        soundness(cfg, &analyses)?,
        limits(&analyses),
        envelope(cfg)?,
        cauchy(cfg, &ops)?,
        zhuk(cfg)?,
        dini(cfg, &analyses)?,
        smoothness(cfg)?,
    ];

    writeln!(log, "{:<12}  {:>6}  {:>8}", "family", "checks", "failures")?;
    let mut ok = true;
    for fam in &families {
        fam.write(dir)?;
        writeln!(
            log,
            "{:<12}  {:>6}  {:>8}",
            fam.name,
            fam.rows.len(),
            fam.failures()
        )?;
        ok &= fam.failures() == 0;
    }
    writeln!(
        log,
        "{}",
        if ok {
            "all checks passed"
        } else {
            "some checks failed"
        }
    )?;
    Ok(ok)
}

fn soundness(cfg: &ExperimentConfig, analyses: &[Analysis]) -> CoreResult<Family> {
    let fs = functions(&FUNCTIONS);
    let moduli: Vec<Moduli> = fs
        .iter()
        .map(|f| Moduli::new(f, cfg.omega_grid))
        .collect::<CoreResult<_>>()?;
    let cells: Vec<(usize, usize, u64)> = (0..analyses.len())
        .flat_map(|a| (0..fs.len()).flat_map(move |f| cfg.m_list.iter().map(move |&m| (a, f, m))))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(a, f, m)| {
            let an = &analyses[a];
            let r = an.verify_with(&fs[f], &moduli[f], m, an.select()?)?;
            Ok((
                vec![
                    r.operator.clone(),
                    r.function.clone(),
                    m.to_string(),
                    r.theorem_id.to_string(),
                    num(r.min_margin()),
                    r.violations.len().to_string(),
                ],
                r.passed(),
            ))
        })
        .collect::<CoreResult<Vec<_>>>()?;
    let mut fam = Family::new(
        "soundness",
        &[
            "operator",
            "function",
            "m",
            "theorem_id",
            "min_margin",
            "violations",
        ],
    );
    for (row, pass) in rows {
        fam.push(row, pass);
    }
    Ok(fam)
}

fn limits(analyses: &[Analysis]) -> Family {
    let mut fam = Family::new(
        "limits",
        &[
            "operator",
            "kind",
            "m_star",
            "residual",
            "closed_form_distance",
        ],
    );
    for an in analyses {
        let lim = an.limit();
        let dist = lim.closed_form_distance();
        fam.push(
            vec![
                an.operator().name().to_string(),
                lim.kind.to_string(),
                lim.m_star.to_string(),
                num(lim.residual),
                dist.map(num).unwrap_or_default(),
            ],
            lim.kind != LimitKind::General && dist.is_some_and(|d| d <= 1e-8),
        );
    }
    fam
}

fn envelope(cfg: &ExperimentConfig) -> CoreResult<Family> {
    let mut fam = Family::new(
        "envelope",
        &[
            "operator",
            "a",
            "m",
            "lower_excess",
            "upper_excess",
            "upper_gap",
        ],
    );
    for n in [2usize, 5, 10] {
        let op = make_bernstein(n)?;
        let a = 1.0 - 1.0 / n as f64;
        for m in 0..=30 {
            let r = moment_envelope(&op, a, m, cfg.grid)?;
            let pass = r.passed() && r.upper_gap <= 1e-10;
            fam.push(
                vec![
                    r.operator,
                    num(a),
                    m.to_string(),
                    num(r.lower_excess),
                    num(r.upper_excess),
                    num(r.upper_gap),
                ],
                pass,
            );
        }
    }
    Ok(fam)
}

fn cauchy(cfg: &ExperimentConfig, ops: &[SamplingOperator]) -> CoreResult<Family> {
    let gs = functions(&["e2", "sine_pi"]);
    let mut fam = Family::new(
        "cauchy",
        &[
            "operator",
            "function",
            "m",
            "p",
            "e1_coefficient",
            "worst_excess",
        ],
    );
    for op in ops {
        for g in &gs {
            for m in [0u64, 1, 2, 4] {
                for p in [1u64, 2, 8] {
                    let r = cauchy_gap(op, g, m, p, cfg.grid)?;
                    let pass = r.passed();
                    fam.push(
                        vec![
                            r.operator,
                            r.function,
                            m.to_string(),
                            p.to_string(),
                            num(r.e1_coefficient),
                            num(r.worst_excess),
                        ],
                        pass,
                    );
                }
            }
        }
    }
    Ok(fam)
}

fn zhuk(cfg: &ExperimentConfig) -> CoreResult<Family> {
    let mut fam = Family::new(
        "zhuk",
        &[
            "function",
            "h",
            "l",
            "d1",
            "d1_limit",
            "d2",
            "d2_limit",
            "approx_error",
            "approx_bound",
            "epsilon",
        ],
    );
    for f in functions(&ZHUK_FUNCTIONS) {
        for h in ZHUK_H {
            let r = check_zhuk_bounds_with(&f, h, ZHUK_L, cfg.grid, cfg.omega_grid)?;
            let pass = r.passes(ZHUK_SLACK);
            fam.push(
                vec![
                    r.function.clone(),
                    num(h),
                    r.l.to_string(),
                    num(r.d1),
                    num(r.d1_limit),
                    num(r.d2),
                    num(r.d2_limit),
                    num(r.approx_error),
                    num(r.approx_bound),
                    num(r.epsilon),
                ],
                pass,
            );
        }
    }
    Ok(fam)
}

fn dini(cfg: &ExperimentConfig, analyses: &[Analysis]) -> CoreResult<Family> {
    let e2: FunctionSpec = "e2".parse().expect("catalog name");
    let mut fam = Family::new("dini", &["operator", "function", "m_last"]);
    for an in analyses {
        if !matches!(an.sign().tag, SignTag::PreservesE1 | SignTag::GeqE1) {
            continue;
        }
        let pass = monotone_iterates(an.operator(), &e2, 20, cfg.grid, 1e-12)?;
        fam.push(
            vec![
                an.operator().name().to_string(),
                e2.to_string(),
                "20".into(),
            ],
            pass,
        );
    }
    Ok(fam)
}

fn smoothness(cfg: &ExperimentConfig) -> CoreResult<Family> {
    let n = cfg.omega_grid;
    let tol = 2.0 / n as f64;
    let e2: FunctionSpec = "e2".parse().expect("catalog name");
    let kink: FunctionSpec = "abs_shift:0.5".parse().expect("catalog name");
    let mut fam = Family::new("smoothness", &["check", "value", "expected", "tolerance"]);
    let mut push = |check: String, value: f64, expected: f64, tol: f64| {
        fam.push(
            vec![check, num(value), num(expected), num(tol)],
            (value - expected).abs() <= tol,
        );
    };
    for delta in [0.01, 0.1, 0.25, 0.4] {
        push(
            format!("omega2(e2;{delta})"),
            omega(2, &e2, delta, n)?,
            2.0 * delta * delta,
            tol,
        );
    }
    push(
        "omega2(abs_shift:0.5;0.2)".into(),
        omega(2, &kink, 0.2, n)?,
        0.4,
        tol,
    );
    let bl = best_linear(|x| x * x, 0.0, 1.0)?;
    push("best_linear(e2;0,1)".into(), bl.deviation, 0.125, 1e-8);
    Ok(fam)
}
