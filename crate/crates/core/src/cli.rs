//! Command-line front end.
//!
//! ```text
//! issparabolic <validate|simulate|verify-iss|trace-constant|sweep|example>
//!     --scenario <path> [--out <dir>] [--multipliers a,b,c] [--tol x]
//! ```
//!
//! Exit codes: 0 success, 1 load or usage error, 2 validation failure,
//! 3 solver failure, 4 bound violated, 5 estimator non-convergence.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, ValueEnum};

use crate::bounds::write_bounds_csv;
use crate::geometry::{estimate_trace_constant, TraceEstimate};
use crate::problem::{
    validate_compatibility, validate_monotonicity, validate_structural, BoundaryKind, MonotoneRole, ValidationReport,
};
use crate::scenario::{Scenario, TraceSource};
use crate::solver::{solve, write_snapshots, write_trajectory_csv, SolutionTrajectory};
use crate::splitting::{verify_spec, SplitError, Verification};

/// Environment variable capping the number of concurrent sweep runs.
pub const THREADS_ENV: &str = "ISSPARABOLIC_THREADS";
/// Sample count per axis of the structural and monotonicity validators.
pub const VALIDATION_SAMPLES: usize = 201;
/// `u` range sampled by the monotonicity validators.
pub const VALIDATION_U_RANGE: (f64, f64) = (-10.0, 10.0);
/// Resolutions compared by `trace-constant`.
pub const TRACE_RESOLUTIONS: (usize, usize) = (200, 400);
/// Largest relative drift between the two trace resolutions.
pub const TRACE_DRIFT_TOL: f64 = 0.01;
/// Multipliers used by `sweep` when none are given.
pub const DEFAULT_MULTIPLIERS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];
pub const SWEEP_HEADER: &str = "multiplier,sup_d,max_norm,steady_response,max_bound,pass";

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExitStatus {
    Success = 0,
    LoadError = 1,
    ValidationFailed = 2,
    SolverFailed = 3,
    BoundViolated = 4,
    EstimatorFailed = 5,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Run the structural, monotonicity and compatibility validators.
    Validate,
    /// Solve and write the trajectory and snapshots.
    Simulate,
    /// Solve u and v, run every check and write the verification report.
    VerifyIss,
    /// Estimate the trace constant at two resolutions.
    TraceConstant,
    /// Run verify-iss for each disturbance multiplier.
    Sweep,
    /// Write the shipped example scenario.
    Example,
}

#[derive(Debug, Clone, Parser)]
#[command(
    name = "issparabolic",
    version,
    about = "Simulate nonlinear parabolic PDEs on a ball and verify ISS envelopes"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Scenario file (for `example`, the file to write).
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Disturbance multipliers for `sweep`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub multipliers: Option<Vec<f64>>,
    /// Relative tolerance of the bound checks (overrides the scenario).
    #[arg(long)]
    pub tol: Option<f64>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli, out, err),
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            if e.use_stderr() {
                ExitStatus::LoadError
            } else {
                let _ = write!(out, "{}", e.render());
                ExitStatus::Success
            }
        }
    }
}

/// Runs one command. Diagnostics go to `err`, results to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> ExitStatus {
    if let Some(tol) = cli.tol {
        if !(tol >= 0.0 && tol.is_finite()) {
            let _ = writeln!(err, "error: --tol must be a non-negative number, got {tol}");
            return ExitStatus::LoadError;
        }
    }
    let result = match cli.command {
        Command::Example => cmd_example(cli, out),
        command => match load(cli) {
            Ok(scenario) => match command {
                Command::Validate => cmd_validate(&scenario, out),
                Command::Simulate => cmd_simulate(&scenario, &out_dir(cli), out),
                Command::VerifyIss => cmd_verify_iss(&scenario, &out_dir(cli), out),
                Command::TraceConstant => cmd_trace_constant(&scenario, out),
                Command::Sweep => {
                    let multipliers = cli.multipliers.clone().unwrap_or_else(|| DEFAULT_MULTIPLIERS.to_vec());
                    cmd_sweep(&scenario, &multipliers, &out_dir(cli), sweep_threads(err), out)
                }
                Command::Example => unreachable!(),
            },
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(status) => status,
        Err(CliError { status, message }) => {
            let _ = writeln!(err, "error: {message}");
            status
        }
    }
}

/// A failed command: its exit status and message.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub status: ExitStatus,
    pub message: String,
}

impl CliError {
    fn new(status: ExitStatus, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }

    fn io(context: &str, path: &Path, e: io::Error) -> Self {
        Self::new(ExitStatus::LoadError, format!("{context} {}: {e}", path.display()))
    }
}

type CmdResult = Result<ExitStatus, CliError>;

fn load(cli: &Cli) -> Result<Scenario, CliError> {
    let path =
        cli.scenario.as_ref().ok_or_else(|| CliError::new(ExitStatus::LoadError, "--scenario <path> is required"))?;
    let mut scenario = Scenario::load(path).map_err(|e| CliError::new(ExitStatus::LoadError, e.to_string()))?;
    if let Some(tol) = cli.tol {
        scenario.tol = tol;
    }
    Ok(scenario)
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

/// Reads [`THREADS_ENV`]; unset or invalid values give 1.
fn sweep_threads(err: &mut dyn Write) -> usize {
    match std::env::var(THREADS_ENV) {
        Err(_) => 1,
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => n,
            _ => {
                let _ = writeln!(err, "warning: ignoring {THREADS_ENV}={v:?}; using 1 thread");
                1
            }
        },
    }
}

fn create_file(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    fs::File::create(path).map(BufWriter::new).map_err(|e| CliError::io("cannot create", path, e))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> io::Result<()>) -> Result<(), CliError> {
    let mut file = create_file(path)?;
    f(&mut file).and_then(|_| file.flush()).map_err(|e| CliError::io("cannot write", path, e))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io("cannot create directory", dir, e))
}

/// Runs the three validators on a scenario.
pub fn validate_scenario(scenario: &Scenario) -> Result<ValidationReport, CliError> {
    let spec = &scenario.spec;
    let horizon = scenario.grid.horizon;
    let fail = |e: crate::problem::ProblemError| CliError::new(ExitStatus::ValidationFailed, e.to_string());
    let structural = validate_structural(spec, horizon, VALIDATION_SAMPLES).map_err(fail)?;
    let role = MonotoneRole::Nonlinearity { geometry: spec.geometry, horizon };
    let h = validate_monotonicity(&spec.h, role, VALIDATION_SAMPLES, VALIDATION_U_RANGE).map_err(fail)?;
    let psi = validate_monotonicity(&spec.psi, MonotoneRole::Boundary, VALIDATION_SAMPLES, VALIDATION_U_RANGE)
        .map_err(fail)?;
    let compat = validate_compatibility(spec).map_err(fail)?;
    Ok(structural.merge(prefixed(h, "h")).merge(prefixed(psi, "psi")).merge(compat))
}

fn prefixed(mut report: ValidationReport, field: &'static str) -> ValidationReport {
    for check in &mut report.checks {
        check.detail = format!("[{field}] {}", check.detail);
    }
    report
}

fn print_scenario_header(scenario: &Scenario, out: &mut dyn Write) {
    let s = &scenario.spec;
    let trace = match scenario.trace_source {
        TraceSource::Declared => "declared".to_string(),
        TraceSource::Estimated { raw } => format!("estimated {raw:.6} x {}", scenario.bounds.safety_factor()),
    };
    let _ = writeln!(
        out,
        "scenario: n = {}, R = {}, {} boundary, nr = {}, dt = {}, T = {}, C_trace = {:.6} ({trace})",
        s.geometry.dimension(),
        s.geometry.radius(),
        s.boundary,
        scenario.grid.nr,
        scenario.grid.dt,
        scenario.grid.horizon,
        s.constants.trace_constant,
    );
}

pub fn cmd_validate(scenario: &Scenario, out: &mut dyn Write) -> CmdResult {
    print_scenario_header(scenario, out);
    let report = validate_scenario(scenario)?;
    let _ = write!(out, "{report}");
    if report.passed() {
        let _ = writeln!(out, "validation passed");
        Ok(ExitStatus::Success)
    } else {
        for c in report.failures() {
            let _ = writeln!(out, "FAILED {}: {} (margin {:.6e})", c.name, c.detail, c.margin);
        }
        Ok(ExitStatus::ValidationFailed)
    }
}

fn write_trajectory_outputs(traj: &SolutionTrajectory, dir: &Path) -> Result<(), CliError> {
    ensure_dir(dir)?;
    write_with(&dir.join("trajectory.csv"), |f| write_trajectory_csv(traj, f))?;
    write_snapshots(traj, dir).map_err(|e| CliError::io("cannot write snapshots to", dir, e))
}

pub fn cmd_simulate(scenario: &Scenario, dir: &Path, out: &mut dyn Write) -> CmdResult {
    print_scenario_header(scenario, out);
    let result = solve(
        &scenario.spec,
        &scenario.radial_grid(),
        &scenario.time_grid(),
        scenario.grid.snapshot_stride,
        &scenario.solver_options(),
    );
    match result {
        Ok(traj) => {
            write_trajectory_outputs(&traj, dir)?;
            let max_iters = traj.newton_iters.iter().max().copied().unwrap_or(0);
            let _ = writeln!(
                out,
                "solved {} steps to t = {}; final l2 = {:.6e}, sup = {:.6e}, max newton iterations = {}",
                traj.len() - 1,
                traj.final_time(),
                traj.l2_norm.last().copied().unwrap_or(0.0),
                traj.sup_norm.last().copied().unwrap_or(0.0),
                max_iters
            );
            let _ = writeln!(out, "wrote {}", dir.display());
            Ok(ExitStatus::Success)
        }
        Err(failure) => {
            write_trajectory_outputs(&failure.partial, dir)?;
            Err(CliError::new(
                ExitStatus::SolverFailed,
                format!(
                    "{} (partial output up to t = {} in {})",
                    failure.error,
                    failure.partial.final_time(),
                    dir.display()
                ),
            ))
        }
    }
}

fn split_failure(e: SplitError, dir: &Path) -> CliError {
    match e {
        SplitError::Solve { which, failure } => {
            let partial = if which == "u" { write_trajectory_outputs(&failure.partial, dir).err() } else { None };
            let mut message = format!("{which}-solve failed: {}", failure.error);
            if let Some(io) = partial {
                message.push_str(&format!("; {}", io.message));
            }
            CliError::new(ExitStatus::SolverFailed, message)
        }
        SplitError::Bounds(b) => CliError::new(ExitStatus::ValidationFailed, b.to_string()),
        other => CliError::new(ExitStatus::SolverFailed, other.to_string()),
    }
}

/// Validates, solves and checks one scenario, writing the trajectory of `u`,
/// its snapshots, `report.csv` and `bounds.csv` to `dir`.
fn verify_pipeline(scenario: &Scenario, dir: &Path) -> Result<Verification, CliError> {
    let report = validate_scenario(scenario)?;
    if !report.passed() {
        let names: Vec<&str> = report.failures().map(|c| c.name).collect();
        return Err(CliError::new(
            ExitStatus::ValidationFailed,
            format!("validation failed: {}\n{report}", names.join(", ")),
        ));
    }
    let verification = verify_spec(
        &scenario.spec,
        &scenario.radial_grid(),
        &scenario.time_grid(),
        &scenario.solver_options(),
        &scenario.verify_config(),
    )
    .map_err(|e| split_failure(e, dir))?;
    ensure_dir(dir)?;
    let u = &verification.run.u;
    write_with(&dir.join("trajectory.csv"), |f| write_trajectory_csv(u, f))?;
    let stride = scenario.grid.snapshot_stride;
    let last = u.snapshots.len().saturating_sub(1);
    for snap in u.snapshots.iter().filter(|s| s.step % stride == 0 || s.step == last) {
        write_with(&dir.join(format!("snapshot_{}.csv", snap.step)), |f| {
            crate::solver::write_snapshot_csv(u.grid.nodes(), &snap.state, f)
        })?;
    }
    write_with(&dir.join("report.csv"), |f| verification.report.write_csv(f))?;
    write_with(&dir.join("bounds.csv"), |f| write_bounds_csv(&verification.estimates, f))?;
    Ok(verification)
}

pub fn cmd_verify_iss(scenario: &Scenario, dir: &Path, out: &mut dyn Write) -> CmdResult {
    print_scenario_header(scenario, out);
    let verification = verify_pipeline(scenario, dir)?;
    let _ = write!(out, "{}", verification.report);
    let _ = writeln!(out, "wrote {}", dir.display());
    if verification.report.passed() {
        let _ = writeln!(out, "all checks passed");
        Ok(ExitStatus::Success)
    } else {
        let names: Vec<&str> = verification.report.failures().map(|c| c.claim.as_str()).collect();
        let _ = writeln!(out, "violated: {}", names.join(", "));
        Ok(ExitStatus::BoundViolated)
    }
}

/// Estimates at both [`TRACE_RESOLUTIONS`]; fails when an estimate does not
/// converge or the two differ by more than [`TRACE_DRIFT_TOL`].
pub fn trace_estimates(scenario: &Scenario) -> Result<(TraceEstimate, TraceEstimate), CliError> {
    let geom = &scenario.spec.geometry;
    let est =
        |res| estimate_trace_constant(geom, res).map_err(|e| CliError::new(ExitStatus::EstimatorFailed, e.to_string()));
    let (lo, hi) = (est(TRACE_RESOLUTIONS.0)?, est(TRACE_RESOLUTIONS.1)?);
    if !(lo.converged && hi.converged) || !(lo.value.is_finite() && hi.value.is_finite() && hi.value > 0.0) {
        return Err(CliError::new(ExitStatus::EstimatorFailed, "trace estimate did not converge"));
    }
    let drift = (hi.value - lo.value).abs() / hi.value;
    if drift > TRACE_DRIFT_TOL {
        return Err(CliError::new(
            ExitStatus::EstimatorFailed,
            format!("trace estimates {} and {} drift by {drift:.3e}", lo.value, hi.value),
        ));
    }
    Ok((lo, hi))
}

pub fn cmd_trace_constant(scenario: &Scenario, out: &mut dyn Write) -> CmdResult {
    let (lo, hi) = trace_estimates(scenario)?;
    let factor = scenario.bounds.safety_factor();
    let g = &scenario.spec.geometry;
    let _ = writeln!(out, "n = {}, R = {}", g.dimension(), g.radius());
    let _ = writeln!(out, "resolution {:>5}: {:.10}", lo.grid_resolution, lo.value);
    let _ = writeln!(out, "resolution {:>5}: {:.10}", hi.grid_resolution, hi.value);
    let _ = writeln!(out, "relative drift: {:.3e}", (hi.value - lo.value).abs() / hi.value);
    let _ = writeln!(out, "safety factor {factor}: {:.10}", hi.inflated(factor));
    if let TraceSource::Declared = scenario.trace_source {
        let _ = writeln!(out, "declared: {}", scenario.spec.constants.trace_constant);
    }
    Ok(ExitStatus::Success)
}

/// One sweep run's summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub multiplier: f64,
    /// Effective `sup|d|` of the scaled scenario.
    pub sup_d: f64,
    pub max_norm: f64,
    /// `max ‖u(t)‖` over `[T/2, T]`.
    pub steady_response: f64,
    pub max_bound: f64,
    pub passed: bool,
}

fn multiplier_dir(dir: &Path, index: usize, m: f64) -> PathBuf {
    dir.join(format!("m{index:02}_{m}"))
}

fn sweep_one(scenario: &Scenario, m: f64, dir: &Path) -> Result<SweepRow, CliError> {
    let scaled = scenario.with_disturbance_scale(m);
    let v = verify_pipeline(&scaled, dir)?;
    let u = &v.run.u;
    let half = 0.5 * u.final_time();
    let steady_response =
        u.times.iter().zip(&u.l2_norm).filter(|(t, _)| **t >= half).map(|(_, n)| *n).fold(0.0, f64::max);
    let max_bound = v.estimates.iter().map(|e| e.total).fold(0.0, f64::max);
    Ok(SweepRow {
        multiplier: m,
        sup_d: scaled.overrides.sup_d.unwrap_or_else(|| sampled_sup_d(&scaled, &u.times)),
        max_norm: u.l2_norm.iter().copied().fold(0.0, f64::max),
        steady_response,
        max_bound,
        passed: v.report.passed(),
    })
}

fn sampled_sup_d(scenario: &Scenario, times: &[f64]) -> f64 {
    let radius = scenario.spec.geometry.radius();
    times.iter().filter_map(|&t| scenario.spec.d.eval_rtu(radius, t, 0.0).ok()).fold(0.0, |m: f64, v| m.max(v.abs()))
}

/// Whether the steady response is non-decreasing in `sup|d|`.
pub fn sweep_is_monotone(rows: &[SweepRow]) -> bool {
    let mut sorted: Vec<&SweepRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.sup_d.total_cmp(&b.sup_d));
    sorted.windows(2).all(|w| {
        let (lo, hi) = (w[0], w[1]);
        // equal amplitudes must give equal responses up to round-off
        let slack = 1e-12 * lo.steady_response.abs().max(1.0);
        hi.steady_response + slack >= lo.steady_response
    })
}

/// Runs the verification pipeline for each multiplier on up to `threads`
/// worker threads. Rows come back in input order.
pub fn run_sweep(
    scenario: &Scenario,
    multipliers: &[f64],
    dir: &Path,
    threads: usize,
) -> Vec<Result<SweepRow, CliError>> {
    let slots: Vec<Mutex<Option<Result<SweepRow, CliError>>>> = multipliers.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = threads.clamp(1, multipliers.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&m) = multipliers.get(i) else { break };
                let row = sweep_one(scenario, m, &multiplier_dir(dir, i, m));
                *slots[i].lock().expect("sweep slot poisoned") = Some(row);
            });
        }
    });
    slots.into_iter().map(|s| s.into_inner().expect("sweep slot poisoned").expect("every slot filled")).collect()
}

pub fn cmd_sweep(
    scenario: &Scenario,
    multipliers: &[f64],
    dir: &Path,
    threads: usize,
    out: &mut dyn Write,
) -> CmdResult {
    if multipliers.is_empty() || multipliers.iter().any(|m| !m.is_finite()) {
        return Err(CliError::new(ExitStatus::LoadError, "--multipliers must be a non-empty list of finite numbers"));
    }
    print_scenario_header(scenario, out);
    ensure_dir(dir)?;
    let results = run_sweep(scenario, multipliers, dir, threads);
    let mut rows = Vec::with_capacity(results.len());
    let mut worst: Option<CliError> = None;
    for (m, r) in multipliers.iter().zip(results) {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                let e = CliError::new(e.status, format!("multiplier {m}: {}", e.message));
                if worst.as_ref().is_none_or(|w| e.status > w.status) {
                    worst = Some(e);
                }
            }
        }
    }
    write_with(&dir.join("sweep.csv"), |f| {
        writeln!(f, "{SWEEP_HEADER}")?;
        for r in &rows {
            writeln!(
                f,
                "{},{},{},{},{},{}",
                r.multiplier, r.sup_d, r.max_norm, r.steady_response, r.max_bound, r.passed
            )?;
        }
        Ok(())
    })?;
    let _ = writeln!(
        out,
        "{:>10} {:>12} {:>14} {:>14} {:>14}  result",
        "multiplier", "sup_d", "max_norm", "steady", "max_bound"
    );
    for r in &rows {
        let verdict = if r.passed { "pass" } else { "FAIL" };
        let _ = writeln!(
            out,
            "{:>10} {:>12.4e} {:>14.6e} {:>14.6e} {:>14.6e}  {verdict}",
            r.multiplier, r.sup_d, r.max_norm, r.steady_response, r.max_bound
        );
    }
    if let Some(e) = worst {
        return Err(e);
    }
    let monotone = sweep_is_monotone(&rows);
    let _ = writeln!(out, "steady response monotone in amplitude: {monotone}");
    let _ = writeln!(out, "wrote {}", dir.join("sweep.csv").display());
    if monotone && rows.iter().all(|r| r.passed) {
        Ok(ExitStatus::Success)
    } else {
        Ok(ExitStatus::BoundViolated)
    }
}

/// Writes the shipped Robin example to `--scenario`, to
/// `--out/example_robin.scenario`, or to standard output.
pub fn cmd_example(cli: &Cli, out: &mut dyn Write) -> CmdResult {
    let text = Scenario::example(BoundaryKind::Robin, 1.0).to_text();
    let target = match (&cli.scenario, &cli.out) {
        (Some(path), _) => Some(path.clone()),
        (None, Some(dir)) => {
            ensure_dir(dir)?;
            Some(dir.join("example_robin.scenario"))
        }
        (None, None) => None,
    };
    match target {
        Some(path) => {
            write_with(&path, |f| f.write_all(text.as_bytes()))?;
            let _ = writeln!(out, "wrote {}", path.display());
        }
        None => {
            let _ = out.write_all(text.as_bytes());
        }
    }
    Ok(ExitStatus::Success)
}
