use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use korovkin_core::bounds::{default_slack, VerifyConfig};
use korovkin_core::iterate::{DEFAULT_M_MAX, DEFAULT_TOL};
use korovkin_core::{FunctionSpec, OperatorSpec};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "korovkin",
    version,
    about = "Iterates of positive linear operators and their error estimates"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print T(e0), T(e1), T(e2) and the sign class of T(e1) - e1
    Moments(Common),
    /// Compare the sharpest applicable estimate with the true iterate error
    Verify(VerifyArgs),
    /// Compute the limit operator and classify it
    Limit(Common),
    /// Check the smoothing-operator derivative and approximation bounds
    Zhuk(ZhukArgs),
    /// Run every check family and write one CSV per family
    Suite(SuiteArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct Common {
    /// bernstein:n | stancu:n:alpha:beta | king:n | mkz:n:tol[:x_max] | matrix:<path>
    #[arg(long)]
    pub operator: String,
    /// Grid intervals for stored functions
    #[arg(long, default_value_t = 1024)]
    pub grid: usize,
    /// Cauchy tolerance for the limit
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Largest iteration count the limit search may reach
    #[arg(long, default_value_t = DEFAULT_M_MAX)]
    pub m_max: u64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Output file; stdout when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Catalog function, e.g. e2, abs_shift:0.5, sine_pi
    #[arg(long)]
    pub function: String,
    /// Iteration counts: comma list and/or a:b inclusive ranges
    #[arg(long, default_value = "1")]
    pub m: String,
    /// Grid intervals for moduli of smoothness
    #[arg(long, default_value_t = 4096)]
    pub omega_grid: usize,
    /// Allowed negative margin; defaults to 1e-6 + 4/omega-grid
    #[arg(long)]
    pub slack: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ZhukArgs {
    #[arg(long)]
    pub function: String,
    /// Smoothing width(s), comma separated
    #[arg(long, default_value = "0.05,0.1,0.2")]
    pub h: String,
    /// Bernstein degree used to approximate the smoothed function
    #[arg(long, default_value_t = 400)]
    pub l: usize,
    #[arg(long, default_value_t = 1024)]
    pub grid: usize,
    #[arg(long, default_value_t = 4096)]
    pub omega_grid: usize,
    /// Relative slack on the derivative bounds
    #[arg(long, default_value_t = 0.05)]
    pub slack: f64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SuiteArgs {
    /// Iteration counts for the soundness matrix
    #[arg(long, default_value = "1,2,4,8,16,32")]
    pub m: String,
    #[arg(long, default_value_t = 1024)]
    pub grid: usize,
    #[arg(long, default_value_t = 4096)]
    pub omega_grid: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long)]
    pub slack: Option<f64>,
    /// Directory for the per-family CSV files
    #[arg(long, default_value = "korovkin-suite")]
    pub out: PathBuf,
}

/// Validated settings shared by `verify` and `suite`.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub operator: Option<OperatorSpec>,
    pub function: Option<FunctionSpec>,
    pub m_list: Vec<u64>,
    pub grid: usize,
    pub omega_grid: usize,
    pub tol: f64,
    pub m_max: u64,
    pub slack: f64,
}

impl ExperimentConfig {
    pub fn verify_config(&self) -> VerifyConfig {
        VerifyConfig {
            grid: self.grid,
            omega_grid: self.omega_grid,
            tol: self.tol,
            m_max: self.m_max,
            slack: Some(self.slack),
        }
    }

    pub fn from_verify(a: &VerifyArgs) -> Result<Self, CliError> {
        check_grid("grid", a.common.grid)?;
        check_grid("omega-grid", a.omega_grid)?;
        check_tol(a.common.tol)?;
        Ok(Self {
            operator: Some(parse_operator(&a.common.operator)?),
            function: Some(parse_function(&a.function)?),
            m_list: parse_m_list(&a.m)?,
            grid: a.common.grid,
            omega_grid: a.omega_grid,
            tol: a.common.tol,
            m_max: a.common.m_max,
            slack: check_slack(a.slack, a.omega_grid)?,
        })
    }

    pub fn from_suite(a: &SuiteArgs) -> Result<Self, CliError> {
        check_grid("grid", a.grid)?;
        check_grid("omega-grid", a.omega_grid)?;
        check_tol(a.tol)?;
        Ok(Self {
            operator: None,
            function: None,
            m_list: parse_m_list(&a.m)?,
            grid: a.grid,
            omega_grid: a.omega_grid,
            tol: a.tol,
            m_max: DEFAULT_M_MAX,
            slack: check_slack(a.slack, a.omega_grid)?,
        })
    }
}

pub fn parse_operator(s: &str) -> Result<OperatorSpec, CliError> {
    s.parse()
        .map_err(|e| CliError::Config(format!("--operator {s:?}: {e}")))
}

pub fn parse_function(s: &str) -> Result<FunctionSpec, CliError> {
    s.parse()
        .map_err(|e| CliError::Config(format!("--function {s:?}: {e}")))
}

pub fn check_grid(name: &str, n: usize) -> Result<(), CliError> {
    if n < 64 || !n.is_power_of_two() {
        return Err(CliError::Config(format!(
            "--{name} must be a power of two >= 64, got {n}"
        )));
    }
    Ok(())
}

fn check_tol(tol: f64) -> Result<(), CliError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(CliError::Config(format!(
            "--tol must be positive, got {tol}"
        )));
    }
    Ok(())
}

fn check_slack(slack: Option<f64>, omega_grid: usize) -> Result<f64, CliError> {
    match slack {
        None => Ok(default_slack(omega_grid)),
        Some(s) if s >= 0.0 && s.is_finite() => Ok(s),
        Some(s) => Err(CliError::Config(format!(
            "--slack must be nonnegative, got {s}"
        ))),
    }
}

/// Parses `1,2,4` and `1:20` (inclusive), or a mix; the result is sorted and deduplicated.
pub fn parse_m_list(s: &str) -> Result<Vec<u64>, CliError> {
    let bad = |item: &str| CliError::Config(format!("--m: cannot parse {item:?}"));
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim) {
        match item.split_once(':') {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| bad(item))?;
                let b: u64 = b.trim().parse().map_err(|_| bad(item))?;
                if a > b {
                    return Err(CliError::Config(format!("--m: empty range {item:?}")));
                }
                out.extend(a..=b);
            }
            None => out.push(item.parse().map_err(|_| bad(item))?),
        }
    }
    out.sort_unstable();
    out.dedup();
    if out.is_empty() {
        return Err(CliError::Config("--m: no iteration counts".into()));
    }
    Ok(out)
}

pub fn parse_h_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|item| {
            item.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("--h: cannot parse {item:?}")))
        })
        .collect()
}
