//! Command-line front end: `solve`, `sweep`, `reconstruct` and `verify`.

pub mod checks;
pub mod report;

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::connect::{
    self, ConnectError, ConnectOptions, Omega, ScatteringCoefficients, TransferMatrix,
};
use crate::disk::{self, UnitaryFamilySample};
use crate::model::{validate, ModelError, ProblemConfig, ValidatedConfig};
use checks::{run_checks, sign_relation_holds, CheckInput};
use report::{format_f64, RunReport, Status, Table, Timing};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_INVARIANT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Compute(String),
    #[error("invariant failures: {}", .0.join(", "))]
    Invariants(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) | CliError::Io(_) => EXIT_USAGE,
            CliError::Compute(_) | CliError::Invariants(_) => EXIT_INVARIANT,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ConnectError> for CliError {
    fn from(e: ConnectError) -> Self {
        match e {
            ConnectError::Model(m) => CliError::Config(m.to_string()),
            other => CliError::Compute(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sqm", version, about = "Scattering off singular potentials: transfer matrix, Ŝ(Ω) and Cauchy averages")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transfer matrix, coefficients and invariant checklist for one config.
    Solve(SolveArgs),
    /// Ŝ along a grid of Ω, k or Θ values.
    Sweep(SweepArgs),
    /// Interior Ŝ(Ω) from unitary boundary samples vs direct evaluation.
    Reconstruct(ReconstructArgs),
    /// Run every invariant check; exit 1 if any fails.
    Verify(VerifyArgs),
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Use the configured r_max verbatim and skip r_max doubling (testing only).
    #[arg(long)]
    pub no_stabilize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Omega,
    K,
    Theta,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long, default_value_t = 128)]
    pub nodes: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub axis: Axis,
    /// START:STOP:COUNT; Ω phases exclude STOP, k and Θ include it.
    #[arg(long)]
    pub grid: Option<GridSpec>,
    /// Ω as "re,im" or "inf"; for the omega axis an explicit list replaces --grid.
    #[arg(long, allow_hyphen_values = true)]
    pub omega: Vec<OmegaArg>,
    /// Modulus of the Ω circle swept by --grid on the omega axis.
    #[arg(long, default_value_t = 1.0)]
    pub modulus: f64,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 128)]
    pub nodes: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub omega: Vec<OmegaArg>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 128)]
    pub nodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl FromStr for GridSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(format!("grid {s:?} is not START:STOP:COUNT"));
        };
        let start: f64 = a.trim().parse().map_err(|e| format!("grid start: {e}"))?;
        let stop: f64 = b.trim().parse().map_err(|e| format!("grid stop: {e}"))?;
        let count: usize = n.trim().parse().map_err(|e| format!("grid count: {e}"))?;
        if count == 0 || !start.is_finite() || !stop.is_finite() {
            return Err(format!("grid {s:?} needs finite bounds and a positive count"));
        }
        Ok(Self { start, stop, count })
    }
}

impl GridSpec {
    pub fn inclusive(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.start + step * i as f64).collect()
    }

    pub fn exclusive(&self) -> Vec<f64> {
        let step = (self.stop - self.start) / self.count as f64;
        (0..self.count).map(|i| self.start + step * i as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaArg(pub Omega);

impl FromStr for OmegaArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") {
            return Ok(OmegaArg(Omega::Infinity));
        }
        let t = t.trim_start_matches('(').trim_end_matches(')');
        let parts: Vec<&str> = t.split(',').collect();
        let parse = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("omega {s:?}: {e}"));
        match parts.as_slice() {
            [re] => Ok(OmegaArg(Omega::new(parse(re)?, 0.0))),
            [re, im] => Ok(OmegaArg(Omega::new(parse(re)?, parse(im)?))),
            _ => Err(format!("omega {s:?} is not \"re,im\"")),
        }
    }
}

pub fn load_config(path: &Path) -> Result<ProblemConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
    ProblemConfig::from_json(&text)
        .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
}

fn options(common: &Common) -> ConnectOptions {
    ConnectOptions {
        stabilize: !common.no_stabilize,
        ..ConnectOptions::default()
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(e.to_string())),
    }
}

/// Coefficients even on the `|T| ≈ 0` branch, plus whether it was hit.
fn coefficients(m: &TransferMatrix, tol: f64) -> (ScatteringCoefficients, bool) {
    match connect::scattering_coefficients(m, tol) {
        Ok(c) => (c, false),
        Err(ConnectError::DegenerateTransmission { coefficients, .. }) => (*coefficients, true),
        Err(_) => (ScatteringCoefficients::from_transfer(m), false),
    }
}

/// Full pipeline for one configuration, with the invariant checklist.
pub fn build_report(
    config: &ProblemConfig,
    opts: &ConnectOptions,
    nodes: usize,
) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let vc = validate(config)?;
    let m = connect::transfer_matrix_with(&vc, opts)?;
    let (sc, degenerate_transmission) = coefficients(&m, vc.tol());
    let map = connect::blaschke_params(&m, vc.tol());
    let checks = run_checks(&CheckInput {
        config: &vc,
        options: *opts,
        nodes,
        transfer: &m,
        coefficients: &sc,
        map: &map,
    });
    let status = if checks.iter().all(|c| c.passed) {
        Status::Pass
    } else {
        Status::Fail
    };
    Ok(RunReport {
        config: config.clone(),
        transfer: m,
        coefficients: sc,
        degenerate_transmission,
        s_matrix: map,
        full_phase: Complex64::from_polar(1.0, PI * config.l_plus_nu),
        checks,
        status,
        timing: Timing {
            seconds: start.elapsed().as_secs_f64(),
        },
    })
}

pub fn cmd_solve(args: &SolveArgs) -> Result<RunReport, CliError> {
    if args.nodes < 8 {
        return Err(CliError::Usage(format!("--nodes must be at least 8 (got {})", args.nodes)));
    }
    let config = load_config(&args.common.config)?;
    let report = build_report(&config, &options(&args.common), args.nodes)?;
    let text = match args.format {
        Format::Json => report.to_json().map_err(|e| CliError::Io(e.to_string()))? + "\n",
        Format::Csv => report.to_csv().map_err(|e| CliError::Io(e.to_string()))?,
    };
    write_output(args.common.output.as_deref(), &text)?;
    Ok(report)
}

fn complex_cells(z: Option<Complex64>) -> [String; 2] {
    match z {
        Some(z) => [format_f64(z.re), format_f64(z.im)],
        None => [String::new(), String::new()],
    }
}

fn omega_cells(w: Omega) -> [String; 2] {
    match w {
        Omega::Finite(z) => complex_cells(Some(z)),
        Omega::Infinity => ["inf".into(), "inf".into()],
    }
}

fn sweep_row(
    axis: &str,
    value: f64,
    vc: &ValidatedConfig,
    m: &TransferMatrix,
    omega: Omega,
) -> Vec<String> {
    let tol = vc.tol();
    let map = connect::blaschke_params(m, tol);
    let s = map.eval(omega, tol).ok();
    let abs_r = ScatteringCoefficients::from_transfer(m).r.norm();
    let sign_ok = match (omega, s) {
        (Omega::Finite(w), Some(s)) => {
            if (w.norm() - 1.0).abs() <= 1e-12 {
                (s.norm() - 1.0).abs() <= 10.0 * tol
            } else {
                sign_relation_holds(w, s, 1e-10)
            }
        }
        (Omega::Infinity, Some(s)) => s.norm() >= 1.0 - 1e-10,
        (_, None) => false,
    };
    let [wr, wi] = omega_cells(omega);
    let [sr, si] = complex_cells(s);
    vec![
        axis.to_string(),
        format_f64(value),
        wr,
        wi,
        sr,
        si,
        s.map_or(String::new(), |s| format_f64(s.norm())),
        format_f64(abs_r),
        if sign_ok { "pass" } else { "fail" }.to_string(),
    ]
}

pub const SWEEP_HEADER: [&str; 9] = [
    "axis",
    "value",
    "omega_re",
    "omega_im",
    "re_s",
    "im_s",
    "abs_s",
    "abs_r",
    "sign_relation",
];

pub fn sweep_table(config: &ProblemConfig, args: &SweepArgs) -> Result<Table, CliError> {
    let opts = options(&args.common);
    let vc = validate(config)?;
    let mut table = Table::new(&SWEEP_HEADER);
    match args.axis {
        Axis::Omega => {
            let omegas: Vec<(f64, Omega)> = if !args.omega.is_empty() {
                args.omega.iter().enumerate().map(|(i, o)| (i as f64, o.0)).collect()
            } else {
                let grid = args.grid.ok_or_else(|| {
                    CliError::Usage("omega sweep needs --grid or --omega".into())
                })?;
                grid.exclusive()
                    .into_iter()
                    .map(|chi| (chi, Omega::Finite(Complex64::from_polar(args.modulus, chi))))
                    .collect()
            };
            let m = connect::transfer_matrix_with(&vc, &opts)?;
            for (value, w) in omegas {
                table.rows.push(sweep_row("omega", value, &vc, &m, w));
            }
        }
        Axis::K | Axis::Theta => {
            let grid = args
                .grid
                .ok_or_else(|| CliError::Usage("k and theta sweeps need --grid".into()))?;
            let omega = args.omega.first().map_or(Omega::new(0.0, 0.0), |o| o.0);
            let name = if args.axis == Axis::K { "k" } else { "theta" };
            if args.axis == Axis::Theta && config.p != 2.0 {
                return Err(CliError::Usage("theta sweeps need p = 2".into()));
            }
            let rows: Result<Vec<Vec<String>>, CliError> = grid
                .inclusive()
                .into_par_iter()
                .map(|x| {
                    let mut c = config.clone();
                    if args.axis == Axis::K {
                        c.k = x;
                    } else {
                        c.lambda = x * x + 0.25;
                    }
                    let v = validate(&c)?;
                    let m = connect::transfer_matrix_with(&v, &opts)?;
                    Ok(sweep_row(name, x, &v, &m, omega))
                })
                .collect();
            table.rows = rows?;
        }
    }
    Ok(table)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<Table, CliError> {
    let config = load_config(&args.common.config)?;
    let table = sweep_table(&config, args)?;
    write_output(
        args.common.output.as_deref(),
        &table.to_csv().map_err(|e| CliError::Io(e.to_string()))?,
    )?;
    Ok(table)
}

pub const RECONSTRUCT_HEADER: [&str; 11] = [
    "kind",
    "omega_re",
    "omega_im",
    "reconstructed_re",
    "reconstructed_im",
    "direct_re",
    "direct_im",
    "abs_difference",
    "error_estimate",
    "nodes",
    "valid",
];

pub fn reconstruct_table(
    config: &ProblemConfig,
    opts: &ConnectOptions,
    nodes: usize,
    omegas: &[Omega],
) -> Result<Table, CliError> {
    if nodes < 8 {
        return Err(CliError::Usage(format!("--nodes must be at least 8 (got {nodes})")));
    }
    let vc = validate(config)?;
    let tol = vc.tol();
    let m = connect::transfer_matrix_with(&vc, opts)?;
    let map = connect::blaschke_params(&m, tol);
    let samples = UnitaryFamilySample::from_fn(nodes, |w| map.eval(w.into(), tol))?;
    let mut table = Table::new(&RECONSTRUCT_HEADER);

    let zero = Complex64::new(0.0, 0.0);
    let avg = disk::absorption_average(&samples);
    let direct = map.eval(zero.into(), tol)?;
    let [ar, ai] = complex_cells(Some(avg));
    let [dr, di] = complex_cells(Some(direct));
    table.rows.push(vec![
        "uniform_average".into(),
        format_f64(0.0),
        format_f64(0.0),
        ar,
        ai,
        dr,
        di,
        format_f64((avg - direct).norm()),
        String::new(),
        nodes.to_string(),
        "true".into(),
    ]);

    for &w in omegas {
        let [wr, wi] = omega_cells(w);
        let rec = w
            .finite()
            .ok_or(disk::DiskError::OutsideDisk {
                modulus: f64::INFINITY,
            })
            .and_then(|z| disk::cauchy_reconstruct(&samples, z));
        let row = match rec {
            Ok(r) => {
                let d = map.eval(w, tol)?;
                let [rr, ri] = complex_cells(Some(r.value));
                let [dr, di] = complex_cells(Some(d));
                vec![
                    "cauchy".into(),
                    wr,
                    wi,
                    rr,
                    ri,
                    dr,
                    di,
                    format_f64((r.value - d).norm()),
                    format_f64(r.error_estimate),
                    nodes.to_string(),
                    "true".into(),
                ]
            }
            Err(e) => {
                let mut row = vec!["cauchy".into(), wr, wi];
                row.extend(std::iter::repeat_n(String::new(), 6));
                row.push(nodes.to_string());
                row.push(format!("false: {e}"));
                row
            }
        };
        table.rows.push(row);
    }
    Ok(table)
}

pub fn default_reconstruct_omegas() -> Vec<Omega> {
    vec![
        Omega::new(0.0, 0.0),
        Omega::new(0.3, 0.0),
        Omega::new(0.5, 0.2),
        Omega::new(0.9, 0.0),
    ]
}

pub fn cmd_reconstruct(args: &ReconstructArgs) -> Result<Table, CliError> {
    let config = load_config(&args.common.config)?;
    let omegas: Vec<Omega> = if args.omega.is_empty() {
        default_reconstruct_omegas()
    } else {
        args.omega.iter().map(|o| o.0).collect()
    };
    let table = reconstruct_table(&config, &options(&args.common), args.nodes, &omegas)?;
    write_output(
        args.common.output.as_deref(),
        &table.to_csv().map_err(|e| CliError::Io(e.to_string()))?,
    )?;
    Ok(table)
}

impl From<disk::DiskError> for CliError {
    fn from(e: disk::DiskError) -> Self {
        CliError::Compute(e.to_string())
    }
}

/// Prints the check table to stderr; `Err(Invariants)` lists failures.
pub fn cmd_verify(args: &VerifyArgs) -> Result<RunReport, CliError> {
    let config = load_config(&args.common.config)?;
    let report = match build_report(&config, &options(&args.common), args.nodes) {
        Ok(r) => r,
        Err(CliError::Compute(msg)) => {
            let name = msg.split(':').next().unwrap_or("Compute").to_string();
            eprintln!("FAIL  {msg}");
            return Err(CliError::Invariants(vec![name]));
        }
        Err(e) => return Err(e),
    };
    let mut err = std::io::stderr();
    for c in &report.checks {
        let _ = writeln!(
            err,
            "{:4}  {:<22} defect {:>12.3e}  tol {:>9.2e}{}",
            if c.passed { "ok" } else { "FAIL" },
            c.name,
            c.defect,
            c.tolerance,
            c.detail.as_deref().map_or(String::new(), |d| format!("  ({d})")),
        );
    }
    if let Some(path) = &args.common.output {
        let text = report.to_json().map_err(|e| CliError::Io(e.to_string()))? + "\n";
        write_output(Some(path), &text)?;
    }
    let failing = report.failing();
    if failing.is_empty() {
        Ok(report)
    } else {
        Err(CliError::Invariants(failing.iter().map(|s| s.to_string()).collect()))
    }
}

/// Dispatches a parsed command line and maps the outcome to an exit status.
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a).map(|_| ()),
        Command::Sweep(a) => cmd_sweep(a).map(|_| ()),
        Command::Reconstruct(a) => cmd_reconstruct(a).map(|_| ()),
        Command::Verify(a) => cmd_verify(a).map(|_| ()),
    };
    match result {
        Ok(()) => EXIT_PASS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g: GridSpec = "0:1:5".parse().unwrap();
        assert_eq!(g.inclusive(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.exclusive(), vec![0.0, 0.2, 0.4, 0.6000000000000001, 0.8]);
        assert!("0:1".parse::<GridSpec>().is_err());
        assert!("0:1:0".parse::<GridSpec>().is_err());
        assert!("a:1:3".parse::<GridSpec>().is_err());
    }

    #[test]
    fn omega_parsing() {
        assert_eq!("0.5,-0.2".parse::<OmegaArg>().unwrap().0, Omega::new(0.5, -0.2));
        assert_eq!("(1, 2)".parse::<OmegaArg>().unwrap().0, Omega::new(1.0, 2.0));
        assert_eq!("-0.3".parse::<OmegaArg>().unwrap().0, Omega::new(-0.3, 0.0));
        assert_eq!("inf".parse::<OmegaArg>().unwrap().0, Omega::Infinity);
        assert!("1,2,3".parse::<OmegaArg>().is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::Invariants(vec![]).exit_code(), 1);
        let e: CliError = ConnectError::Model(ModelError::NonSingular { lambda: 0.0 }).into();
        assert_eq!(e.exit_code(), 2);
    }
}
