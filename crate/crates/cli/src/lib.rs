//! Experiment runner behind the `logtm` binary.
//!
//! Every subcommand produces one CSV table (header row, LF line endings,
//! shortest round-trip decimals). Output goes to `--out` through a temporary
//! file that is renamed into place, or to standard output.
//!
//! Exit codes: 0 success, 1 numerical failure or a failed check (the table is
//! still written), 2 usage error.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use logtm_core::euler_lagrange::{el_report, estimate_theta};
use logtm_core::kernel::{reports_to_csv, SplitOracle};
use logtm_core::maximize::maximize;
use logtm_core::moser::{log_log_slope, moser_table, moser_table_csv, threshold_exponent};
use logtm_core::rearrange::{riesz_check_with, RieszReport};
use logtm_core::samples::{random_smooth_profile, random_step_profile};
use logtm_core::{
    dim_params, DimensionParams, Domain, Error, GrowthSpec, MaximizeOptions, MaximizeResult,
    RadialGrid, RadialProfile,
};

/// Tolerance of the kernel gap, relative to `max(1, |b0|)`.
pub const KERNEL_GAP_TOL: f64 = 5e-3;
/// Allowed violation of the rearrangement inequalities.
pub const REARRANGE_TOL: f64 = 1e-4;
/// Largest accepted normalized Euler-Lagrange residual.
pub const EL_TOL: f64 = 1e-3;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(Error::Domain(_) | Error::Usage(_) | Error::Parse(_)) => EXIT_USAGE,
            CliError::Core(_) | CliError::Io { .. } => EXIT_FAILURE,
        }
    }
}

fn parse_dim(s: &str) -> Result<usize, String> {
    let n: usize = s.parse().map_err(|e| format!("`{s}` is not an integer: {e}"))?;
    if n < 2 {
        return Err(format!("dimension must be >= 2, got {n}"));
    }
    Ok(n)
}

fn parse_min<const MIN: usize>(s: &str) -> Result<usize, String> {
    let n: usize = s.parse().map_err(|e| format!("`{s}` is not an integer: {e}"))?;
    if n < MIN {
        return Err(format!("must be >= {MIN}, got {n}"));
    }
    Ok(n)
}

fn parse_index(s: &str) -> Result<u64, String> {
    let n: u64 = s.parse().map_err(|e| format!("`{s}` is not an integer: {e}"))?;
    if n < 2 {
        return Err(format!("Moser index must be >= 2, got {n}"));
    }
    Ok(n)
}

fn parse_finite(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("`{s}` is not a number: {e}"))?;
    if !x.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(x)
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let x = parse_finite(s)?;
    if x <= 0.0 {
        return Err(format!("must be > 0, got {x}"));
    }
    Ok(x)
}

fn parse_domain(s: &str) -> Result<Domain, String> {
    s.parse::<Domain>().map_err(|e| e.to_string())
}

#[derive(Debug, Clone, PartialEq, Parser)]
#[command(name = "logtm", version, about = "Logarithmic Trudinger-Moser experiments on radial profiles")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand)]
pub enum Command {
    /// Dimension constants `n,omega,alpha_n,c_n`.
    Dims(DimsArgs),
    /// Radial reduction of `b0` against the angular quadrature oracle.
    VerifyKernel(KernelArgs),
    /// Riesz and Polya-Szego gaps under Schwarz symmetrization.
    RearrangeCheck(KernelArgs),
    /// Ball energy along the Moser sequence.
    Moser(MoserArgs),
    /// Moser tables over a grid of dimensions and exponents with slope fits.
    Sweep(SweepArgs),
    /// Constrained maximization of the ball or whole-space energy.
    Maximize(MaximizeArgs),
    /// Weak Euler-Lagrange residuals of a maximizer.
    ElCheck(ElCheckArgs),
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct Output {
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct DimsArgs {
    /// Dimensions.
    #[arg(long = "n", alias = "n-dim", value_delimiter = ',', value_parser = parse_dim, default_value = "2")]
    pub n: Vec<usize>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct KernelArgs {
    #[arg(long, value_parser = parse_dim)]
    pub n_dim: usize,
    /// First seed; profile `k` uses `seed + k`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of random profiles (5 for verify-kernel, 20 for rearrange-check).
    #[arg(long, value_parser = parse_min::<1>)]
    pub profiles: Option<usize>,
    /// Angular quadrature nodes of the oracle.
    #[arg(long, value_parser = parse_min::<16>, default_value_t = 2048)]
    pub angular: usize,
    /// Radial cells on `[0, 1]`.
    #[arg(long, value_parser = parse_min::<8>, default_value_t = 512)]
    pub grid: usize,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct MoserArgs {
    #[arg(long, value_parser = parse_dim)]
    pub n_dim: usize,
    #[arg(long, allow_hyphen_values = true, value_parser = parse_finite)]
    pub beta: f64,
    #[arg(long, value_parser = parse_positive, default_value_t = 1.0)]
    pub c: f64,
    /// Moser indices.
    #[arg(long = "n", value_delimiter = ',', value_parser = parse_index, default_value = "10,100,1000,10000")]
    pub n: Vec<u64>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', value_parser = parse_dim, default_value = "2,3")]
    pub n_dim: Vec<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, value_parser = parse_finite)]
    pub beta: Vec<f64>,
    /// Read `--beta` as offsets from the threshold `-N/(2(N-1))`.
    #[arg(long)]
    pub relative: bool,
    #[arg(long, value_parser = parse_positive, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long = "n", value_delimiter = ',', value_parser = parse_index, default_value = "100,1000,10000,100000")]
    pub n: Vec<u64>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct Problem {
    #[arg(long, value_parser = parse_dim)]
    pub n_dim: usize,
    #[arg(long, allow_hyphen_values = true, value_parser = parse_finite)]
    pub beta: f64,
    #[arg(long, value_parser = parse_positive, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, value_parser = parse_domain, default_value = "ball")]
    pub domain: Domain,
    /// Radial cells.
    #[arg(long, value_parser = parse_min::<8>, default_value_t = 512)]
    pub grid: usize,
    /// Truncation radius of the whole-space problem.
    #[arg(long, value_parser = parse_positive, default_value_t = 32.0)]
    pub radius: f64,
    /// Perturbation seed of the initial profile (0 keeps it unperturbed).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = parse_min::<1>, default_value_t = 5000)]
    pub max_iters: usize,
}

impl Problem {
    fn spec(&self) -> Result<(GrowthSpec, DimensionParams), CliError> {
        let p = dim_params(self.n_dim)?;
        let spec = match self.domain {
            Domain::Ball => GrowthSpec::ball_critical(self.beta, self.c, p)?,
            Domain::Space => GrowthSpec::space_critical(self.beta, self.c, p)?,
        };
        Ok((spec, p))
    }

    fn options(&self) -> MaximizeOptions {
        MaximizeOptions {
            grid_size: self.grid,
            max_iters: self.max_iters,
            seed: self.seed,
            radius: self.radius,
            ..MaximizeOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct MaximizeArgs {
    #[command(flatten)]
    pub problem: Problem,
    /// Also write the maximizing profile as `r,u`.
    #[arg(long)]
    pub profile_out: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct ElCheckArgs {
    #[command(flatten)]
    pub problem: Problem,
    /// Check this `r,u` profile instead of running the maximizer.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    /// Number of hat test functions.
    #[arg(long, value_parser = parse_min::<4>, default_value_t = 16)]
    pub n_test: usize,
    #[command(flatten)]
    pub output: Output,
}

/// Parses the arguments that follow the program name.
pub fn parse_args<I, S>(argv: I) -> Result<RunConfig, clap::Error>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    RunConfig::try_parse_from(std::iter::once("logtm".into()).chain(argv.into_iter().map(Into::into)))
}

/// A finished table and whether its checks passed.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub csv: String,
    pub passed: bool,
}

impl Outcome {
    fn ok(csv: String) -> Self {
        Self { csv, passed: true }
    }
}

/// Runs the subcommand without touching the file system (except for inputs
/// and `--profile-out`).
pub fn execute(config: &RunConfig) -> Result<Outcome, CliError> {
    match &config.command {
        Command::Dims(a) => dims(a),
        Command::VerifyKernel(a) => verify_kernel(a),
        Command::RearrangeCheck(a) => rearrange_check(a),
        Command::Moser(a) => moser(a),
        Command::Sweep(a) => sweep(a),
        Command::Maximize(a) => run_maximize(a),
        Command::ElCheck(a) => el_check(a),
    }
}

impl RunConfig {
    pub fn out(&self) -> Option<&Path> {
        let output = match &self.command {
            Command::Dims(a) => &a.output,
            Command::VerifyKernel(a) | Command::RearrangeCheck(a) => &a.output,
            Command::Moser(a) => &a.output,
            Command::Sweep(a) => &a.output,
            Command::Maximize(a) => &a.output,
            Command::ElCheck(a) => &a.output,
        };
        output.out.as_deref()
    }
}

/// Executes the subcommand, writes its table and returns the exit code.
pub fn run(config: &RunConfig) -> i32 {
    let outcome = match execute(config) {
        Ok(outcome) => outcome,
        Err(e) => {
            eprintln!("logtm: {e}");
            return e.exit_code();
        }
    };
    let written = match config.out() {
        Some(path) => write_atomic(path, &outcome.csv),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(outcome.csv.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io { path: "<stdout>".into(), source })
        }
    };
    if let Err(e) = written {
        eprintln!("logtm: {e}");
        return e.exit_code();
    }
    if outcome.passed {
        EXIT_OK
    } else {
        eprintln!("logtm: check failed");
        EXIT_FAILURE
    }
}

/// Parses, runs and reports; the body of `main`.
pub fn main_with_args<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    match parse_args(argv) {
        Ok(config) => run(&config),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_OK
            }
        }
    }
}

/// Writes `text` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, text: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io { path: path.to_path_buf(), source };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(text.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn dims(a: &DimsArgs) -> Result<Outcome, CliError> {
    let mut csv = String::from("n,omega,alpha_n,c_n\n");
    for &n in &a.n {
        let p = dim_params(n)?;
        let _ = writeln!(csv, "{},{},{},{}", p.n, p.omega, p.alpha_n, p.c_n);
    }
    Ok(Outcome::ok(csv))
}

fn unit_grid(cells: usize) -> Result<Arc<RadialGrid>, CliError> {
    Ok(Arc::new(RadialGrid::uniform(1.0, cells)?))
}

fn verify_kernel(a: &KernelArgs) -> Result<Outcome, CliError> {
    let p = dim_params(a.n_dim)?;
    let grid = unit_grid(a.grid)?;
    let oracle = SplitOracle::new(&grid, &p, a.angular)?;
    let mut rows = Vec::new();
    let mut passed = true;
    for k in 0..a.profiles.unwrap_or(5) as u64 {
        let seed = a.seed + k;
        let v = random_step_profile(grid.clone(), 8, seed)?;
        let report = oracle.report(&v, &v)?;
        passed &= report.gap <= KERNEL_GAP_TOL * report.b0.abs().max(1.0);
        rows.push((seed, report));
    }
    Ok(Outcome { csv: reports_to_csv("seed", &rows), passed })
}

fn rearrange_check(a: &KernelArgs) -> Result<Outcome, CliError> {
    let p = dim_params(a.n_dim)?;
    let grid = unit_grid(a.grid)?;
    let oracle = SplitOracle::new(&grid, &p, a.angular)?;
    let mut csv = format!("{}\n", RieszReport::CSV_HEADER);
    let mut passed = true;
    for k in 0..a.profiles.unwrap_or(20) as u64 {
        let seed = a.seed + k;
        let v = random_smooth_profile(grid.clone(), seed)?;
        let report = riesz_check_with(&oracle, &v, &p)?;
        passed &= report.min_gap() >= -REARRANGE_TOL;
        let _ = writeln!(csv, "{}", report.csv_row(seed));
    }
    Ok(Outcome { csv, passed })
}

fn moser(a: &MoserArgs) -> Result<Outcome, CliError> {
    let p = dim_params(a.n_dim)?;
    let spec = GrowthSpec::ball_critical(a.beta, a.c, p)?;
    let rows = moser_table(&a.n, &spec)?;
    let passed = rows.iter().all(|r| !r.bound_valid || r.phi >= r.lower_bound);
    Ok(Outcome { csv: moser_table_csv(&rows), passed })
}

pub const SWEEP_HEADER: &str = "n_dim,beta,n,phi,lower_bound,bound_valid,slope,predicted_slope";

fn sweep(a: &SweepArgs) -> Result<Outcome, CliError> {
    if a.beta.is_empty() {
        return Err(CliError::Usage("sweep needs at least one --beta".into()));
    }
    let mut cases = Vec::new();
    for &n_dim in &a.n_dim {
        let p = dim_params(n_dim)?;
        for &b in &a.beta {
            cases.push((n_dim, if a.relative { p.beta_star() + b } else { b }));
        }
    }
    let mut groups = cases
        .par_iter()
        .map(|&(n_dim, beta)| {
            let spec = GrowthSpec::ball_critical(beta, a.c, dim_params(n_dim)?)?;
            let rows = moser_table(&a.n, &spec)?;
            Ok((n_dim, beta, rows))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    groups.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
    let mut csv = format!("{SWEEP_HEADER}\n");
    for (n_dim, beta, rows) in groups {
        let slope = if rows.len() >= 2 { log_log_slope(&rows) } else { f64::NAN };
        let predicted = threshold_exponent(n_dim, beta);
        for r in rows {
            let _ = writeln!(
                csv,
                "{n_dim},{beta},{},{},{},{},{slope},{predicted}",
                r.n, r.phi, r.lower_bound, r.bound_valid
            );
        }
    }
    Ok(Outcome::ok(csv))
}

fn run_maximize(a: &MaximizeArgs) -> Result<Outcome, CliError> {
    let (spec, p) = a.problem.spec()?;
    let result = maximize(&spec, a.problem.domain, &p, &a.problem.options())?;
    for w in &result.warnings {
        eprintln!("logtm: warning: {w}");
    }
    if let Some(path) = &a.profile_out {
        write_atomic(path, &result.profile.to_csv())?;
    }
    let csv = format!("{}\n{}\n", MaximizeResult::CSV_HEADER, result.csv_row(&spec));
    Ok(Outcome { csv, passed: result.converged })
}

fn el_check(a: &ElCheckArgs) -> Result<Outcome, CliError> {
    let (spec, p) = a.problem.spec()?;
    let domain = a.problem.domain;
    let (profile, theta, converged) = match &a.profile {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|source| CliError::Io { path: path.clone(), source })?;
            let u = RadialProfile::from_csv(&text)?;
            let theta = estimate_theta(&u, &spec, domain, &p)?;
            (u, theta, true)
        }
        None => {
            let r = maximize(&spec, domain, &p, &a.problem.options())?;
            (r.profile, r.theta, r.converged)
        }
    };
    let report = el_report(&profile, theta, &spec, domain, &p, a.n_test)?;
    let passed = converged && theta > 0.0 && report.residual() <= EL_TOL;
    Ok(Outcome { csv: report.to_csv(), passed })
}
