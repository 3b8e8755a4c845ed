use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use korovkin_core::BoundReport;
use serde::Serialize;

use crate::CliError;

pub const SCHEMA: &str = "v1";

/// Seventeen significant digits, enough to round-trip an `f64`.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn sink(out: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn csv_writer(w: &mut dyn Write) -> csv::Writer<&mut dyn Write> {
    csv::Writer::from_writer(w)
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: &'static str,
    #[serde(flatten)]
    body: &'a T,
}

pub fn write_json<T: Serialize>(w: &mut dyn Write, body: &T) -> Result<(), CliError> {
    serde_json::to_writer_pretty(
        &mut *w,
        &Envelope {
            schema: SCHEMA,
            body,
        },
    )
    .map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(w)?;
    Ok(())
}

/// Rows `x, m, actual, bound, margin, theorem_id` ordered by `x`, then `m`.
pub fn write_reports_csv(w: &mut dyn Write, reports: &[BoundReport]) -> Result<(), CliError> {
    let mut sorted: Vec<&BoundReport> = reports.iter().collect();
    sorted.sort_by_key(|r| r.m);
    let mut csv = csv_writer(w);
    csv.write_record(["x", "m", "actual", "bound", "margin", "theorem_id"])?;
    if let Some(first) = sorted.first() {
        for (i, &x) in first.xs.iter().enumerate() {
            for r in &sorted {
                csv.write_record([
                    num(x),
                    r.m.to_string(),
                    num(r.actual[i]),
                    num(r.bound[i]),
                    num(r.margin[i]),
                    r.theorem_id.to_string(),
                ])?;
            }
        }
    }
    csv.flush()?;
    Ok(())
}

pub fn write_reports_table(w: &mut dyn Write, reports: &[BoundReport]) -> Result<(), CliError> {
    if let Some(r) = reports.first() {
        writeln!(
            w,
            "operator {}  function {}  estimate {}  slack {:.3e}",
            r.operator, r.function, r.theorem_id, r.slack
        )?;
    }
    writeln!(
        w,
        "{:>6}  {:>14}  {:>14}  {:>10}",
        "m", "max actual", "min margin", "violations"
    )?;
    for r in reports {
        let max_actual = r.actual.iter().copied().fold(0.0, f64::max);
        writeln!(
            w,
            "{:>6}  {:>14.6e}  {:>14.6e}  {:>10}",
            r.m,
            max_actual,
            r.min_margin(),
            r.violations.len()
        )?;
    }
    for r in reports.iter().filter(|r| !r.passed()) {
        writeln!(w, "violations at m = {}:", r.m)?;
        writeln!(
            w,
            "{:>14}  {:>14}  {:>14}  {:>14}",
            "x", "actual", "bound", "margin"
        )?;
        for v in &r.violations {
            writeln!(
                w,
                "{:>14.8}  {:>14.6e}  {:>14.6e}  {:>14.6e}",
                v.x, v.actual, v.bound, v.margin
            )?;
        }
    }
    Ok(())
}
