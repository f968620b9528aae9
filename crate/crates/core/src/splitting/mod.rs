//! The decomposition `u = v + w`: `v` carries the disturbances from zero
//! initial data, `w = u - v` carries the initial data. Both `u` and `v` are
//! solved on the same grid; checks compare the computed fields against the
//! maximum principle, the maximum estimates, the Lyapunov decay of `w` and
//! the ISS envelope of `u`.

mod checks;
mod report;

use thiserror::Error;

use crate::bounds::{BoundsError, DisturbanceMagnitudes, GainMeasure, IssEstimate};
use crate::exprlang::{Expression, Var};
use crate::problem::{BoundaryKind, ProblemError, ProblemSpec};
use crate::solver::{
    l2_norm_values, solve, RadialGrid, SolutionTrajectory, SolveFailure, SolverError, SolverOptions, TimeGrid,
};

pub use checks::{
    check_lyapunov_decay, check_lyapunov_gronwall, check_max_estimate, check_max_principle, check_w_equation_residual,
    decay_slope, verify_iss,
};
pub use report::{ClaimResult, ClaimRow, VerificationReport, ViolationKind, REPORT_HEADER};

/// Default relative tolerance of the bound checks.
pub const DEFAULT_TOL: f64 = 0.02;

/// Default `tol_scale` of the w-residual check, `residual ≤ tol_scale·(Δr² + Δt)`.
pub const DEFAULT_RESIDUAL_SCALE: f64 = 250.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SplitError {
    #[error("{which}-solve failed: {failure}")]
    Solve { which: &'static str, failure: SolveFailure },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

/// Problem for `v`: identical except for zero initial data.
pub fn build_v_spec(spec: &ProblemSpec) -> ProblemSpec {
    ProblemSpec { phi: Expression::zero(), ..spec.clone() }
}

/// Paired `u` and `v` solves on one grid, with `‖w‖ = ‖u - v‖` and the
/// w-equation residual at every recorded time.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitRun {
    pub u: SolutionTrajectory,
    pub v: SolutionTrajectory,
    pub w_norm: Vec<f64>,
    pub residual: Vec<f64>,
}

impl SplitRun {
    pub fn times(&self) -> &[f64] {
        &self.u.times
    }

    /// Builds the run from two trajectories that were recorded with
    /// snapshots at every step on the same grid and times.
    pub fn from_trajectories(
        spec: &ProblemSpec,
        u: SolutionTrajectory,
        v: SolutionTrajectory,
    ) -> Result<SplitRun, SplitError> {
        if u.grid != v.grid {
            return Err(SplitError::Precondition("u and v use different radial grids".into()));
        }
        if u.times != v.times {
            return Err(SplitError::Precondition("u and v are recorded at different times".into()));
        }
        if u.snapshots.len() != u.times.len() || v.snapshots.len() != v.times.len() {
            return Err(SplitError::Precondition(format!(
                "snapshots must be stored at every step (strides {} and {})",
                u.snapshot_stride, v.snapshot_stride
            )));
        }
        let w_norm = u
            .snapshots
            .iter()
            .zip(&v.snapshots)
            .map(|(a, b)| {
                let w: Vec<f64> = a.state.values.iter().zip(&b.state.values).map(|(x, y)| x - y).collect();
                l2_norm_values(&w, &u.geometry)
            })
            .collect();
        let residual = checks::w_residual_series(spec, &u, &v)?;
        Ok(SplitRun { u, v, w_norm, residual })
    }
}

/// Solves `u` and `v` (concurrently) with snapshots at every step.
pub fn run_split(
    spec: &ProblemSpec,
    grid: &RadialGrid,
    time: &TimeGrid,
    opts: &SolverOptions,
) -> Result<SplitRun, SplitError> {
    let v_spec = build_v_spec(spec);
    let (u, v) = std::thread::scope(|s| {
        let v_handle = s.spawn(|| solve(&v_spec, grid, time, 1, opts));
        let u = solve(spec, grid, time, 1, opts);
        (u, v_handle.join().expect("v-solve thread panicked"))
    });
    let u = u.map_err(|failure| SplitError::Solve { which: "u", failure })?;
    let v = v.map_err(|failure| SplitError::Solve { which: "v", failure })?;
    SplitRun::from_trajectories(spec, u, v)
}

/// User-declared analytic sup values replacing the sampled ones.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SupOverrides {
    pub sup_f: Option<f64>,
    pub sup_d: Option<f64>,
}

/// Running sups of `|f|` and `|d|` over the grid nodes and recorded times up
/// to each time, plus the initial-data magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeSeries {
    pub times: Vec<f64>,
    pub sup_f: Vec<f64>,
    pub sup_d: Vec<f64>,
    pub sup_phi: f64,
    pub l2_phi: f64,
}

impl MagnitudeSeries {
    pub fn sample(
        spec: &ProblemSpec,
        grid: &RadialGrid,
        times: &[f64],
        overrides: &SupOverrides,
    ) -> Result<Self, SplitError> {
        let eval = |field, expr: &Expression, r, t| ProblemSpec::eval_field(field, expr, r, t, 0.0);
        let nodes = grid.nodes();
        let phi: Vec<f64> = nodes.iter().map(|&r| eval("phi", &spec.phi, r, 0.0)).collect::<Result<_, _>>()?;
        let sup_phi = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let l2_phi = l2_norm_values(&phi, &spec.geometry);
        let (mut run_f, mut run_d) = (0.0f64, 0.0f64);
        let mut sup_f = Vec::with_capacity(times.len());
        let mut sup_d = Vec::with_capacity(times.len());
        let f_static = !spec.f.depends_on(Var::T);
        for (k, &t) in times.iter().enumerate() {
            if !f_static || k == 0 {
                for &r in nodes {
                    run_f = run_f.max(eval("f", &spec.f, r, t)?.abs());
                }
            }
            run_d = run_d.max(eval("d", &spec.d, grid.radius(), t)?.abs());
            sup_f.push(overrides.sup_f.unwrap_or(run_f));
            sup_d.push(overrides.sup_d.unwrap_or(run_d));
        }
        Ok(Self { times: times.to_vec(), sup_f, sup_d, sup_phi, l2_phi })
    }

    /// Magnitudes over `[0, times[index]]`.
    pub fn at(&self, index: usize) -> DisturbanceMagnitudes {
        DisturbanceMagnitudes {
            sup_f: self.sup_f[index],
            sup_d: self.sup_d[index],
            sup_phi: self.sup_phi,
            l2_phi: self.l2_phi,
        }
    }

    /// Magnitudes at the last recorded time not after `t`.
    pub fn at_time(&self, t: f64) -> DisturbanceMagnitudes {
        let idx = self.times.partition_point(|&s| s <= t).max(1) - 1;
        self.at(idx)
    }

    /// The same series with zero initial data.
    pub fn without_initial(&self) -> Self {
        Self { sup_phi: 0.0, l2_phi: 0.0, ..self.clone() }
    }
}

/// Settings of the full verification pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    /// Relative tolerance of the bound checks.
    pub tol: f64,
    /// Absolute tolerance of the maximum-principle check.
    pub max_principle_tol: f64,
    pub residual_scale: f64,
    pub overrides: SupOverrides,
    pub measure: GainMeasure,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_principle_tol: 1e-9,
            residual_scale: DEFAULT_RESIDUAL_SCALE,
            overrides: SupOverrides::default(),
            measure: GainMeasure::default(),
        }
    }
}

/// Output of [`verify_spec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub run: SplitRun,
    pub report: VerificationReport,
    /// The ISS envelope at every recorded `t > 0`.
    pub estimates: Vec<IssEstimate>,
}

/// Solves `u` and `v`, then runs every check: maximum principle on `u`,
/// maximum estimate on `v`, Lyapunov decay of `w`, the w-residual and the
/// ISS envelope on `u`.
pub fn verify_spec(
    spec: &ProblemSpec,
    grid: &RadialGrid,
    time: &TimeGrid,
    opts: &SolverOptions,
    cfg: &VerifyConfig,
) -> Result<Verification, SplitError> {
    let run = run_split(spec, grid, time, opts)?;
    let mags = MagnitudeSeries::sample(spec, grid, run.times(), &cfg.overrides)?;
    let consts = &spec.constants;
    let mut report = check_max_principle(&run.u, spec, cfg.max_principle_tol)?;
    report.push(check_max_estimate(&run.v, spec, &mags.without_initial(), cfg.tol)?);
    report.push(match spec.boundary {
        BoundaryKind::Robin => check_lyapunov_decay(&run, crate::bounds::decay_rate_robin(consts)?, cfg.tol),
        BoundaryKind::Dirichlet => check_lyapunov_decay(&run, crate::bounds::decay_rate_dirichlet(consts)?, cfg.tol),
        BoundaryKind::Neumann => {
            let choice = crate::bounds::choose_epsilon(consts)?;
            let forcing =
                consts.a_upper * consts.a_upper * crate::geometry::sphere_area(&spec.geometry) / choice.epsilon;
            check_lyapunov_gronwall(&run, choice.lambda, forcing, cfg.tol)
        }
    });
    report.push(check_w_equation_residual(&run, cfg.residual_scale));
    let mut estimates = Vec::with_capacity(run.times().len());
    for (k, &t) in run.times().iter().enumerate().skip(1) {
        estimates.push(crate::bounds::iss_bound(
            spec.boundary,
            consts,
            &spec.geometry,
            &mags.at(k),
            &spec.psi,
            t,
            cfg.measure,
        )?);
    }
    let lookup = |t: f64| -> Result<IssEstimate, BoundsError> {
        let idx = run.times().partition_point(|&s| s < t);
        Ok(estimates[idx.saturating_sub(1).min(estimates.len() - 1)])
    };
    report.push(verify_iss(&run.u, lookup, cfg.tol)?);
    Ok(Verification { run, report, estimates })
}

#[cfg(test)]
mod tests;
