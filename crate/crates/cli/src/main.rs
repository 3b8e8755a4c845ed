mod args;
mod output;
mod suite;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use korovkin_core::bounds::Analysis;
use korovkin_core::gridfn::FunctionSpec;
use korovkin_core::iterate::converge_limit;
use korovkin_core::operators::{classify_sign, moments};
use korovkin_core::smoothness::check_zhuk_bounds_with;
use korovkin_core::{BoundReport, Error as CoreError};
use serde::Serialize;

use args::{Cli, Command, Common, ExperimentConfig, Format, SuiteArgs, VerifyArgs, ZhukArgs};
use output::{num, sink, write_json};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] CoreError),
    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(CoreError::NotConverged { .. }) => 3,
            _ => 2,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code());
    }
    let result = match cli.command {
        Command::Moments(a) => cmd_moments(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Limit(a) => cmd_limit(&a),
        Command::Zhuk(a) => cmd_zhuk(&a),
        Command::Suite(a) => cmd_suite(&a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("KOROVKIN_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Config(format!(
            "KOROVKIN_THREADS must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn build_operator(c: &Common) -> Result<korovkin_core::SamplingOperator, CliError> {
    args::check_grid("grid", c.grid)?;
    Ok(args::parse_operator(&c.operator)?.build()?)
}

#[derive(Serialize)]
struct MomentsOut<'a> {
    operator: &'a str,
    sign_class: korovkin_core::SignClass,
    xs: Vec<f64>,
    e0: &'a [f64],
    e1: &'a [f64],
    e2: &'a [f64],
}

fn cmd_moments(c: &Common) -> Result<bool, CliError> {
    let op = build_operator(c)?;
    let sign = classify_sign(&op);
    let t: Vec<_> = (0..3)
        .map(|i| moments(&op, i, c.grid))
        .collect::<korovkin_core::Result<_>>()?;
    let xs: Vec<f64> = (0..=c.grid).map(|i| t[0].x(i)).collect();
    let mut w = sink(c.out.as_deref())?;
    match c.format {
        Format::Json => write_json(
            &mut w,
            &MomentsOut {
                operator: op.name(),
                sign_class: sign,
                xs,
                e0: t[0].values(),
                e1: t[1].values(),
                e2: t[2].values(),
            },
        )?,
        Format::Csv => {
            let mut csv = output::csv_writer(&mut w);
            csv.write_record(["x", "t_e0", "t_e1", "t_e2"])?;
            for (i, &x) in xs.iter().enumerate() {
                csv.write_record([
                    num(x),
                    num(t[0].values()[i]),
                    num(t[1].values()[i]),
                    num(t[2].values()[i]),
                ])?;
            }
            csv.flush()?;
        }
        Format::Table => {
            writeln!(w, "operator {}", op.name())?;
            match sign.witness {
                Some(x) => writeln!(w, "sign class {} (witness x = {x:.6})", sign.tag)?,
                None => writeln!(w, "sign class {}", sign.tag)?,
            }
            writeln!(
                w,
                "T(e1) - e1 ranges over [{:.6e}, {:.6e}]",
                sign.min_excess, sign.max_excess
            )?;
            writeln!(
                w,
                "{:>10}  {:>14}  {:>14}  {:>14}",
                "x", "T(e0)", "T(e1)", "T(e2)"
            )?;
            let step = (c.grid / 16).max(1);
            for i in (0..=c.grid).step_by(step) {
                writeln!(
                    w,
                    "{:>10.6}  {:>14.10}  {:>14.10}  {:>14.10}",
                    xs[i],
                    t[0].values()[i],
                    t[1].values()[i],
                    t[2].values()[i]
                )?;
            }
        }
    }
    w.flush()?;
    Ok(true)
}

#[derive(Serialize)]
struct VerifyOut<'a> {
    reports: &'a [BoundReport],
}

fn cmd_verify(a: &VerifyArgs) -> Result<bool, CliError> {
    let cfg = ExperimentConfig::from_verify(a)?;
    let op = cfg.operator.as_ref().expect("operator").build()?;
    let f: &FunctionSpec = cfg.function.as_ref().expect("function");
    let an = Analysis::new(&op, cfg.verify_config())?;
    let reports: Vec<BoundReport> = cfg
        .m_list
        .iter()
        .map(|&m| an.verify(f, m))
        .collect::<korovkin_core::Result<_>>()?;
    let mut w = sink(a.common.out.as_deref())?;
    match a.common.format {
        Format::Json => write_json(&mut w, &VerifyOut { reports: &reports })?,
        Format::Csv => output::write_reports_csv(&mut w, &reports)?,
        Format::Table => output::write_reports_table(&mut w, &reports)?,
    }
    w.flush()?;
    Ok(reports.iter().all(BoundReport::passed))
}

#[derive(Serialize)]
struct LimitOut<'a> {
    operator: &'a str,
    #[serde(flatten)]
    limit: &'a korovkin_core::LimitInfo,
    closed_form_distance: Option<f64>,
}

fn cmd_limit(c: &Common) -> Result<bool, CliError> {
    let op = build_operator(c)?;
    let lim = converge_limit(&op, c.tol, c.m_max, c.grid)?;
    let dist = lim.closed_form_distance();
    let mut w = sink(c.out.as_deref())?;
    match c.format {
        Format::Json => write_json(
            &mut w,
            &LimitOut {
                operator: op.name(),
                limit: &lim,
                closed_form_distance: dist,
            },
        )?,
        Format::Csv => {
            let mut csv = output::csv_writer(&mut w);
            csv.write_record([
                "operator",
                "kind",
                "m_star",
                "residual",
                "closed_form_distance",
            ])?;
            csv.write_record([
                op.name().to_string(),
                lim.kind.to_string(),
                lim.m_star.to_string(),
                num(lim.residual),
                dist.map(num).unwrap_or_default(),
            ])?;
            csv.flush()?;
        }
        Format::Table => {
            writeln!(w, "operator {}", op.name())?;
            writeln!(w, "kind {}", lim.kind)?;
            writeln!(w, "m_star {}", lim.m_star)?;
            writeln!(w, "residual {:.3e} (tol {:.1e})", lim.residual, lim.tol)?;
            match dist {
                Some(d) => writeln!(w, "closed-form distance {d:.3e}")?,
                None => writeln!(w, "closed-form distance n/a")?,
            }
        }
    }
    w.flush()?;
    Ok(true)
}

fn cmd_zhuk(a: &ZhukArgs) -> Result<bool, CliError> {
    args::check_grid("grid", a.grid)?;
    args::check_grid("omega-grid", a.omega_grid)?;
    let f = args::parse_function(&a.function)?;
    let hs = args::parse_h_list(&a.h)?;
    let reports: Vec<_> = hs
        .iter()
        .map(|&h| check_zhuk_bounds_with(&f, h, a.l, a.grid, a.omega_grid))
        .collect::<korovkin_core::Result<_>>()?;
    let ok = reports.iter().all(|r| r.passes(a.slack));
    let mut w = sink(a.out.as_deref())?;
    match a.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                rel_slack: f64,
                reports: &'a [korovkin_core::smoothness::ZhukReport],
            }
            write_json(
                &mut w,
                &Out {
                    rel_slack: a.slack,
                    reports: &reports,
                },
            )?
        }
        Format::Csv => {
            let mut csv = output::csv_writer(&mut w);
            csv.write_record([
                "function",
                "h",
                "l",
                "d1",
                "d1_limit",
                "d2",
                "d2_limit",
                "approx_error",
                "approx_bound",
                "pass",
            ])?;
            for r in &reports {
                csv.write_record([
                    r.function.clone(),
                    num(r.h),
                    r.l.to_string(),
                    num(r.d1),
                    num(r.d1_limit),
                    num(r.d2),
                    num(r.d2_limit),
                    num(r.approx_error),
                    num(r.approx_bound),
                    r.passes(a.slack).to_string(),
                ])?;
            }
            csv.flush()?;
        }
        Format::Table => {
            writeln!(
                w,
                "{:>6}  {:>11}  {:>11}  {:>11}  {:>11}  {:>11}  {:>11}  {:>5}",
                "h", "||g'||", "limit", "||g''||", "limit", "||f-g||", "limit", "pass"
            )?;
            for r in &reports {
                writeln!(
                    w,
                    "{:>6}  {:>11.4e}  {:>11.4e}  {:>11.4e}  {:>11.4e}  {:>11.4e}  {:>11.4e}  {:>5}",
                    r.h,
                    r.d1,
                    r.d1_limit,
                    r.d2,
                    r.d2_limit,
                    r.approx_error,
                    r.approx_bound,
                    r.passes(a.slack)
                )?;
            }
        }
    }
    w.flush()?;
    Ok(ok)
}

fn cmd_suite(a: &SuiteArgs) -> Result<bool, CliError> {
    let cfg = ExperimentConfig::from_suite(a)?;
    let mut log = std::io::stdout().lock();
    writeln!(
        log,
        "grid {}  omega-grid {}  slack {:.3e}  m {:?}",
        cfg.grid, cfg.omega_grid, cfg.slack, cfg.m_list
    )?;
    suite::run(&cfg, &a.out, &mut log)
}
